//! Threshold detectors for physically irregular recordings: ground idling,
//! stops above the ground, position jumps and infeasible speeds.
//!
//! All detectors work on consecutive-sample intervals. An interval is
//! attributed to its start sample (altitude is read there) and its speed
//! is the position difference over the time difference. Adjacent
//! qualifying intervals are coalesced before the persistence test.
//! Threshold comparisons are strict.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Meters; 3 ft.
    pub ground_altitude_max: f64,
    /// Meters per second below which the aircraft counts as stopped.
    pub slow_speed_max: f64,
    /// Seconds a slow stretch must last to be flagged.
    pub persistence_min: f64,
    /// Meters per second; above the trainer's never-exceed speed.
    pub impossible_speed_min: f64,
    /// Meters of single-step displacement that counts as a jump.
    pub teleport_distance_min: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            ground_altitude_max: 0.9144,
            slow_speed_max: 2.0,
            persistence_min: 5.0,
            impossible_speed_min: 180.0,
            teleport_distance_min: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown detector setting `{0}`")]
    UnknownKey(String),
    #[error("setting `{key}` has invalid value `{value}`")]
    BadValue { key: String, value: String },
    #[error("line {0} is not `key = value`")]
    BadLine(usize),
}

impl DetectorConfig {
    pub const KEYS: [&'static str; 5] = [
        "ground_altitude_max",
        "slow_speed_max",
        "persistence_min",
        "impossible_speed_min",
        "teleport_distance_min",
    ];

    /// Sets one threshold by name; values must be finite and positive.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad());
        }
        let slot = match key.trim() {
            "ground_altitude_max" => &mut self.ground_altitude_max,
            "slow_speed_max" => &mut self.slow_speed_max,
            "persistence_min" => &mut self.persistence_min,
            "impossible_speed_min" => &mut self.impossible_speed_min,
            "teleport_distance_min" => &mut self.teleport_distance_min,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        };
        *slot = v;
        Ok(())
    }

    /// Overlays `key = value` lines onto the defaults. `#` starts a
    /// comment; keys not belonging to the detector are rejected.
    pub fn from_key_values(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = DetectorConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::BadLine(i + 1))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    TaxiingOrStopped,
    IrregularStopping,
    TeleportationOrImpossibleSpeed,
}

impl FlagKind {
    /// Behavior label used in the spreadsheet report.
    pub fn label(self) -> &'static str {
        match self {
            FlagKind::TaxiingOrStopped => "Taxiing or Stopped on Ground",
            FlagKind::IrregularStopping => "Irregular Stopping",
            FlagKind::TeleportationOrImpossibleSpeed => "Teleportation or Impossible Speeds",
        }
    }
}

impl fmt::Display for FlagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaggedInterval {
    pub kind: FlagKind,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularityReport {
    pub sortie_id: String,
    pub flags: Vec<FlaggedInterval>,
    pub clean: bool,
}

/// Maximal runs of consecutive qualifying intervals, as `[t_k, t_{j+1}]`.
fn runs(traj: &Trajectory, qualifies: impl Fn(usize) -> bool) -> Vec<(f64, f64)> {
    let s = traj.samples();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..s.len() - 1 {
        match (qualifies(k), start) {
            (true, None) => start = Some(k),
            (false, Some(a)) => {
                out.push((s[a].t, s[k].t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((s[a].t, s[s.len() - 1].t));
    }
    out
}

fn persistent(runs: Vec<(f64, f64)>, kind: FlagKind, min: f64) -> Vec<FlaggedInterval> {
    runs.into_iter()
        .filter(|(a, b)| b - a >= min)
        .map(|(t_start, t_end)| FlaggedInterval { kind, t_start, t_end })
        .collect()
}

/// Low and slow for at least `persistence_min`.
pub fn detect_taxiing(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<FlaggedInterval> {
    let ground = traj.derived_speeds().ground;
    let s = traj.samples();
    let r = runs(traj, |k| s[k].z_up < cfg.ground_altitude_max && ground[k] < cfg.slow_speed_max);
    persistent(r, FlagKind::TaxiingOrStopped, cfg.persistence_min)
}

/// Stopped (total speed) at or above the ground threshold for at least
/// `persistence_min`.
pub fn detect_irregular_stop(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<FlaggedInterval> {
    let total = traj.derived_speeds().total;
    let s = traj.samples();
    let r = runs(traj, |k| s[k].z_up >= cfg.ground_altitude_max && total[k] < cfg.slow_speed_max);
    persistent(r, FlagKind::IrregularStopping, cfg.persistence_min)
}

/// Instantaneous events at the start of every step that both moves more
/// than `teleport_distance_min` and implies more than
/// `impossible_speed_min`.
pub fn detect_teleport(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<FlaggedInterval> {
    traj.samples()
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = ((b.x_east - a.x_east).powi(2) + (b.y_north - a.y_north).powi(2) + (b.z_up - a.z_up).powi(2))
                .sqrt();
            let speed = d / (b.t - a.t);
            (d > cfg.teleport_distance_min && speed > cfg.impossible_speed_min).then_some(FlaggedInterval {
                kind: FlagKind::TeleportationOrImpossibleSpeed,
                t_start: a.t,
                t_end: a.t,
            })
        })
        .collect()
}

/// Runs where the derived total speed exceeds `impossible_speed_min`; a
/// single interval is enough.
pub fn detect_impossible_speed(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<FlaggedInterval> {
    let total = traj.derived_speeds().total;
    runs(traj, |k| total[k] > cfg.impossible_speed_min)
        .into_iter()
        .map(|(t_start, t_end)| FlaggedInterval {
            kind: FlagKind::TeleportationOrImpossibleSpeed,
            t_start,
            t_end,
        })
        .collect()
}

/// Union of all detectors. Teleport events and impossible-speed runs share
/// one category, so overlapping or touching findings are merged.
pub fn label_sortie(traj: &Trajectory, cfg: &DetectorConfig) -> IrregularityReport {
    let mut jumps = detect_teleport(traj, cfg);
    jumps.extend(detect_impossible_speed(traj, cfg));
    jumps.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then(a.t_end.total_cmp(&b.t_end)));
    let mut merged: Vec<FlaggedInterval> = Vec::with_capacity(jumps.len());
    for f in jumps {
        match merged.last_mut() {
            Some(last) if f.t_start <= last.t_end => last.t_end = last.t_end.max(f.t_end),
            _ => merged.push(f),
        }
    }

    let mut flags = detect_taxiing(traj, cfg);
    flags.extend(detect_irregular_stop(traj, cfg));
    flags.extend(merged);
    flags.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then(a.kind.cmp(&b.kind)));
    IrregularityReport {
        sortie_id: traj.sortie_id().to_string(),
        clean: flags.is_empty(),
        flags,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV with one row per flag, sorted by sortie id then start time. Clean
/// sorties contribute no rows.
pub fn write_report(reports: &[IrregularityReport]) -> Vec<u8> {
    let mut rows: Vec<(&str, &FlaggedInterval)> = reports
        .iter()
        .flat_map(|r| r.flags.iter().map(move |f| (r.sortie_id.as_str(), f)))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.t_start.total_cmp(&b.1.t_start)));
    let mut out = String::from("Sortie Num,Behavior,t_start,t_end\n");
    for (id, f) in rows {
        out.push_str(&format!("{},{},{},{}\n", csv_field(id), f.kind.label(), f.t_start, f.t_end));
    }
    out.into_bytes()
}
