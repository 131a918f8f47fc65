//! `key = value` settings file given with `--config`.
//!
//! Command-line flags win over environment variables, which win over the
//! file. Detector thresholds can only come from the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sortie_core::DetectorConfig;

use crate::CliError;

const KEYS: [&str; 9] = [
    "corpus",
    "journal",
    "bind",
    "templates",
    "rules",
    "seed",
    "train_fraction",
    "temperature",
    "combination_weight",
];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    pub detector: DetectorConfig,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| CliError::usage(format!("config {}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {} is not `key = value`", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if DetectorConfig::KEYS.contains(&k) {
                s.detector.set(k, v).map_err(|e| format!("line {}: {e}", i + 1))?;
            } else if KEYS.contains(&k) {
                s.values.insert(k.to_string(), v.to_string());
            } else {
                return Err(format!("line {}: unknown key `{k}`", i + 1));
            }
        }
        Ok(s)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key `{key}` has invalid value `{v}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_and_rejects() {
        let s = Settings::parse("# comment\ncorpus = /data\nseed=9\npersistence_min = 7.5\n").unwrap();
        assert_eq!(s.get("corpus"), Some("/data"));
        assert_eq!(s.parsed::<u64>("seed").unwrap(), Some(9));
        assert_eq!(s.detector.persistence_min, 7.5);
        assert!(Settings::parse("colour = blue").is_err());
        assert!(Settings::parse("seed").is_err());
        assert!(Settings::parse("slow_speed_max = -1").is_err());
        assert!(Settings::parse("seed = x").unwrap().parsed::<u64>("seed").is_err());
    }
}
