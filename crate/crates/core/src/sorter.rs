//! Boolean threshold rules over summary statistics, corpus scoring and
//! exhaustive grid tuning.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summary::{compute_summary, Statistic, SummaryFeatures};
use crate::trajectory::{Channel, Trajectory};

/// Truth or predicted sortie quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Good,
    Bad,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Good => "good",
            Quality::Bad => "bad",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(Quality::Good),
            "bad" => Ok(Quality::Bad),
            other => Err(format!("quality must be `good` or `bad`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Lt => value < bound,
            Comparator::Le => value <= bound,
            Comparator::Gt => value > bound,
            Comparator::Ge => value >= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub channel: Channel,
    pub statistic: Statistic,
    pub comparator: Comparator,
    pub bound: f64,
}

impl ThresholdRule {
    pub fn new(channel: Channel, statistic: Statistic, comparator: Comparator, bound: f64) -> Self {
        ThresholdRule { channel, statistic, comparator, bound }
    }

    fn feature_index(&self) -> Result<usize, SorterError> {
        SummaryFeatures::index(self.channel, self.statistic).ok_or(SorterError::UnsupportedChannel(self.channel))
    }
}

/// `mean xEast < 500`: statistic, recorder column, comparison.
impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.statistic, self.channel.recorder_name(), self.comparator.symbol(), self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SorterError {
    #[error("a rule set needs at least one rule")]
    EmptyRuleSet,
    #[error("rule bound must be finite, got {0}")]
    NonFiniteBound(f64),
    #[error("channel `{0}` has no summary statistics")]
    UnsupportedChannel(Channel),
    #[error("corpus has no truth-good sorties")]
    NoPositives,
    #[error("corpus has no truth-bad sorties")]
    NoNegatives,
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("unknown named rule set `{0}`")]
    UnknownNamed(String),
    #[error("rule set JSON: {0}")]
    Json(String),
}

/// Text of the bundled `table1` rule set.
pub const TABLE1_JSON: &str = include_str!("../rules/table1.json");

/// Conjunction of threshold rules: a sortie is good iff every rule holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ThresholdRule>", into = "Vec<ThresholdRule>")]
pub struct RuleSet {
    rules: Vec<ThresholdRule>,
}

impl TryFrom<Vec<ThresholdRule>> for RuleSet {
    type Error = SorterError;

    fn try_from(rules: Vec<ThresholdRule>) -> Result<Self, Self::Error> {
        RuleSet::new(rules)
    }
}

impl From<RuleSet> for Vec<ThresholdRule> {
    fn from(r: RuleSet) -> Self {
        r.rules
    }
}

impl RuleSet {
    pub fn new(rules: Vec<ThresholdRule>) -> Result<Self, SorterError> {
        if rules.is_empty() {
            return Err(SorterError::EmptyRuleSet);
        }
        for r in &rules {
            if !r.bound.is_finite() {
                return Err(SorterError::NonFiniteBound(r.bound));
            }
            r.feature_index()?;
        }
        Ok(RuleSet { rules })
    }

    pub fn rules(&self) -> &[ThresholdRule] {
        &self.rules
    }

    /// The starter rules: mean position below 500 m, position spread below
    /// 100 m and negative mean roll. Loaded from the bundled `rules/table1.json`.
    pub fn table1() -> Self {
        Self::from_json(TABLE1_JSON).expect("bundled table1 rules are valid")
    }

    pub fn named(name: &str) -> Result<Self, SorterError> {
        match name {
            "table1" => Ok(Self::table1()),
            other => Err(SorterError::UnknownNamed(other.to_string())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SorterError> {
        serde_json::from_str(text).map_err(|e| SorterError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule sets always serialize")
    }
}

/// True (good) iff every rule's comparison holds.
pub fn evaluate_rules(features: &SummaryFeatures, rules: &RuleSet) -> bool {
    rules.rules.iter().all(|r| {
        let value = features.get(r.channel, r.statistic).expect("validated at construction");
        r.comparator.holds(value, r.bound)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub true_positive_rate: f64,
    pub true_negative_rate: f64,
}

impl ConfusionStats {
    /// Tallies verdicts against truth; "positive" means good.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Quality, bool)>) -> Result<Self, SorterError> {
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (truth, good) in pairs {
            match (truth, good) {
                (Quality::Good, true) => tp += 1,
                (Quality::Good, false) => fn_ += 1,
                (Quality::Bad, false) => tn += 1,
                (Quality::Bad, true) => fp += 1,
            }
        }
        if tp + fn_ == 0 {
            return Err(SorterError::NoPositives);
        }
        if tn + fp == 0 {
            return Err(SorterError::NoNegatives);
        }
        Ok(ConfusionStats {
            tp,
            tn,
            fp,
            fn_,
            true_positive_rate: tp as f64 / (tp + fn_) as f64,
            true_negative_rate: tn as f64 / (tn + fp) as f64,
        })
    }

    pub fn balanced_accuracy(&self) -> f64 {
        (self.true_positive_rate + self.true_negative_rate) / 2.0
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn score_features(corpus: &[(SummaryFeatures, Quality)], rules: &RuleSet) -> Result<ConfusionStats, SorterError> {
    ConfusionStats::from_pairs(corpus.iter().map(|(f, q)| (*q, evaluate_rules(f, rules))))
}

/// Summarizes every sortie (in parallel) and scores the rule set.
pub fn score_corpus(corpus: &[(Trajectory, Quality)], rules: &RuleSet) -> Result<ConfusionStats, SorterError> {
    let verdicts: Vec<(Quality, bool)> = corpus
        .par_iter()
        .map(|(t, q)| (*q, evaluate_rules(&compute_summary(t), rules)))
        .collect();
    ConfusionStats::from_pairs(verdicts)
}

/// One rule position in a tuning grid: a fixed test with candidate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCandidates {
    pub channel: Channel,
    pub statistic: Statistic,
    pub comparator: Comparator,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedRules {
    pub rules: RuleSet,
    pub stats: ConfusionStats,
}

/// Exhaustive search over the Cartesian product of candidate bounds for the
/// rule set with the highest balanced accuracy. Ties go to the
/// lexicographically smallest bound vector.
pub fn tune_rules(corpus: &[(SummaryFeatures, Quality)], grid: &[RuleCandidates]) -> Result<TunedRules, SorterError> {
    if grid.is_empty() || grid.iter().any(|g| g.bounds.is_empty()) {
        return Err(SorterError::EmptyGrid);
    }
    let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    for g in grid {
        if let Some(b) = g.bounds.iter().find(|b| !b.is_finite()) {
            return Err(SorterError::NonFiniteBound(*b));
        }
        let mut b = g.bounds.clone();
        b.sort_by(f64::total_cmp);
        b.dedup();
        sorted.push(b);
        let idx = SummaryFeatures::index(g.channel, g.statistic).ok_or(SorterError::UnsupportedChannel(g.channel))?;
        columns.push(corpus.iter().map(|(f, _)| f.values[idx]).collect());
    }

    // odometer over sorted bounds visits bound vectors in lexicographic order,
    // so keeping only strict improvements yields the smallest tied vector
    let mut choice = vec![0usize; grid.len()];
    let mut best: Option<(f64, Vec<usize>, ConfusionStats)> = None;
    loop {
        let verdicts = (0..corpus.len()).map(|i| {
            let good = grid
                .iter()
                .zip(&choice)
                .enumerate()
                .all(|(r, (g, &c))| g.comparator.holds(columns[r][i], sorted[r][c]));
            (corpus[i].1, good)
        });
        let stats = ConfusionStats::from_pairs(verdicts)?;
        let score = stats.balanced_accuracy();
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, choice.clone(), stats));
        }

        let mut pos = grid.len();
        loop {
            if pos == 0 {
                let (_, choice, stats) = best.expect("grid is non-empty");
                let rules = grid
                    .iter()
                    .zip(&choice)
                    .enumerate()
                    .map(|(r, (g, &c))| ThresholdRule::new(g.channel, g.statistic, g.comparator, sorted[r][c]))
                    .collect();
                return Ok(TunedRules { rules: RuleSet::new(rules)?, stats });
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < sorted[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}
