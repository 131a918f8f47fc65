//! Per-sortie summary statistics.
//!
//! The feature vector is channel-major, statistic-minor: for each channel in
//! [`SUMMARY_CHANNELS`] the five values of [`Statistic::ALL`] in order,
//! 55 entries in total.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trajectory::{Channel, Trajectory};

pub const SUMMARY_CHANNELS: [Channel; 11] = [
    Channel::XEast,
    Channel::YNorth,
    Channel::ZUp,
    Channel::Vx,
    Channel::Vy,
    Channel::Vz,
    Channel::Heading,
    Channel::Pitch,
    Channel::Roll,
    Channel::GroundSpeed,
    Channel::TotalSpeed,
];

pub const FEATURE_COUNT: usize = SUMMARY_CHANNELS.len() * Statistic::ALL.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Std,
    Min,
    Max,
    Range,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Mean,
        Statistic::Std,
        Statistic::Min,
        Statistic::Max,
        Statistic::Range,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Std => "std",
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::Range => "range",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| format!("unknown statistic `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFeatures {
    pub values: Vec<f64>,
    pub duration: f64,
    pub sample_count: usize,
}

impl SummaryFeatures {
    pub fn index(ch: Channel, stat: Statistic) -> Option<usize> {
        let c = SUMMARY_CHANNELS.iter().position(|&x| x == ch)?;
        let s = Statistic::ALL.iter().position(|&x| x == stat)?;
        Some(c * Statistic::ALL.len() + s)
    }

    pub fn get(&self, ch: Channel, stat: Statistic) -> Option<f64> {
        Self::index(ch, stat).map(|i| self.values[i])
    }

    /// `"<channel>_<statistic>"` for every entry, in vector order.
    pub fn feature_names() -> Vec<String> {
        SUMMARY_CHANNELS
            .iter()
            .flat_map(|c| Statistic::ALL.iter().map(move |s| format!("{c}_{s}")))
            .collect()
    }
}

/// Mean, population standard deviation, min, max and range of a non-empty
/// series.
pub fn series_stats(xs: &[f64]) -> [f64; 5] {
    let n = xs.len() as f64;
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding can push the mean of a near-constant series just outside [min, max]
    let mean = (xs.iter().sum::<f64>() / n).clamp(min, max);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    [mean, var.sqrt(), min, max, max - min]
}

pub fn compute_summary(traj: &Trajectory) -> SummaryFeatures {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    let speeds = traj.derived_speeds();
    for ch in SUMMARY_CHANNELS {
        let series = match ch {
            Channel::GroundSpeed => speeds.ground.clone(),
            Channel::TotalSpeed => speeds.total.clone(),
            other => traj.channel(other),
        };
        values.extend(series_stats(&series));
    }
    SummaryFeatures {
        values,
        duration: traj.duration(),
        sample_count: traj.len(),
    }
}
