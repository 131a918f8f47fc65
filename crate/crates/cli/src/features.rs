use serde::{Deserialize, Serialize};
use sortie_core::classify::Dataset;
use sortie_core::Quality;

pub const CLASS_NAMES: [&str; 2] = ["good", "bad"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sortie_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Quality>,
    pub features: Vec<f64>,
}

/// Output of `sortie features`: one summary vector per sortie, sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureFile {
    /// Labeled dataset; class 0 is good, 1 is bad.
    pub fn to_dataset(&self) -> Result<Dataset, String> {
        let mut labels = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            match r.truth {
                Some(Quality::Good) => labels.push(0),
                Some(Quality::Bad) => labels.push(1),
                None => return Err(format!("sortie {} has no truth label", r.sortie_id)),
            }
        }
        Dataset::new(
            self.rows.iter().map(|r| r.features.clone()).collect(),
            labels,
            CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        )
        .map(|d| {
            d.with_feature_names(self.feature_names.clone())
                .with_ids(self.rows.iter().map(|r| r.sortie_id.clone()).collect())
        })
        .map_err(|e| e.to_string())
    }
}
