use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;
use sortie_core::irregularity::FlaggedInterval;
use sortie_core::matcher::{match_sortie, ManeuverTemplate, MatchConfig, MatchResult};
use sortie_core::sim::CorpusEntry;
use sortie_core::sorter::evaluate_rules;
use sortie_core::{compute_summary, label_sortie, read_tsv_file, DetectorConfig, FlagKind, Quality, RuleSet, Trajectory};

use crate::journal::Journal;

/// What the machine says about one sortie, computed once on first use.
#[derive(Debug)]
pub struct Analysis {
    pub trajectory: Trajectory,
    pub auto_quality: Quality,
    pub flags: Vec<FlaggedInterval>,
    pub matches: Option<Vec<MatchResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortieSummary {
    pub sortie_id: String,
    pub duration: f64,
    pub sample_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_quality: Option<Quality>,
    pub auto_quality: Quality,
    /// Distinct flag kinds, in report order.
    pub irregularities: Vec<FlagKind>,
    pub label_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoLabels {
    pub auto_quality: Quality,
    pub irregularities: Vec<FlaggedInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub match_results: Option<Vec<MatchResult>>,
}

type Cached = OnceLock<Result<Arc<Analysis>, String>>;

/// Corpus index (fixed after startup), the analysis cache and the journal.
#[derive(Debug)]
pub struct AppState {
    entries: BTreeMap<String, (CorpusEntry, Cached)>,
    rules: RuleSet,
    detector: DetectorConfig,
    templates: Option<Vec<ManeuverTemplate>>,
    pub journal: Journal,
}

impl AppState {
    pub fn new(
        entries: Vec<CorpusEntry>,
        journal: Journal,
        rules: RuleSet,
        detector: DetectorConfig,
        templates: Option<Vec<ManeuverTemplate>>,
    ) -> Self {
        AppState {
            entries: entries.into_iter().map(|e| (e.sortie_id.clone(), (e, OnceLock::new()))).collect(),
            rules,
            detector,
            templates,
            journal,
        }
    }

    pub fn sortie_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// `None` for an unknown id; `Some(Err)` when the file cannot be read.
    /// Blocking: parses and analyzes on first call.
    pub fn analysis(&self, id: &str) -> Option<Result<Arc<Analysis>, String>> {
        let (entry, cell) = self.entries.get(id)?;
        Some(cell.get_or_init(|| self.analyze(entry)).clone())
    }

    fn analyze(&self, entry: &CorpusEntry) -> Result<Arc<Analysis>, String> {
        let trajectory = read_tsv_file(&entry.path).map_err(|e| e.to_string())?;
        let auto_quality = if evaluate_rules(&compute_summary(&trajectory), &self.rules) {
            Quality::Good
        } else {
            Quality::Bad
        };
        let flags = label_sortie(&trajectory, &self.detector).flags;
        let matches = match &self.templates {
            Some(t) => Some(match_sortie(t, &trajectory, &MatchConfig::default()).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(Arc::new(Analysis {
            trajectory,
            auto_quality,
            flags,
            matches,
        }))
    }

    pub fn summary(&self, id: &str) -> Option<Result<SortieSummary, String>> {
        let (entry, _) = self.entries.get(id)?;
        Some(self.analysis(id)?.map(|a| {
            let mut kinds: Vec<FlagKind> = Vec::new();
            for f in &a.flags {
                if !kinds.contains(&f.kind) {
                    kinds.push(f.kind);
                }
            }
            SortieSummary {
                sortie_id: id.to_string(),
                duration: a.trajectory.duration(),
                sample_count: a.trajectory.len(),
                truth_quality: entry.truth,
                auto_quality: a.auto_quality,
                irregularities: kinds,
                label_count: self.journal.count_for(id),
            }
        }))
    }

    pub fn auto(&self, id: &str) -> Option<Result<AutoLabels, String>> {
        Some(self.analysis(id)?.map(|a| AutoLabels {
            auto_quality: a.auto_quality,
            irregularities: a.flags.clone(),
            match_results: a.matches.clone(),
        }))
    }
}
