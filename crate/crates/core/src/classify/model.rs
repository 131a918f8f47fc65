use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifyError, ForestModel, GaussianNaiveBayes, LogisticModel, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tree,
    Bagging,
    RandomForest,
    Logistic,
    NaiveBayes,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Tree,
        ModelKind::Bagging,
        ModelKind::RandomForest,
        ModelKind::Logistic,
        ModelKind::NaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Bagging => "bagging",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Logistic => "logistic",
            ModelKind::NaiveBayes => "naive_bayes",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "forest" && *k == ModelKind::RandomForest))
            .ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeNode),
    Forest(ForestModel),
    Logistic(LogisticModel),
    NaiveBayes(GaussianNaiveBayes),
}

impl Classifier for Model {
    fn predict(&self, row: &[f64]) -> usize {
        match self {
            Model::Tree(m) => m.predict(row),
            Model::Forest(m) => m.predict(row),
            Model::Logistic(m) => m.predict(row),
            Model::NaiveBayes(m) => m.predict(row),
        }
    }
}

/// Split used to produce the training set, so a later evaluation can
/// rebuild the matching held-out rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub kind: ModelKind,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitInfo>,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(kind: ModelKind, class_names: Vec<String>, feature_names: Vec<String>, model: Model) -> Self {
        ModelDocument {
            version: MODEL_FORMAT_VERSION,
            kind,
            class_names,
            feature_names,
            split: None,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelLoadError> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| ModelLoadError::Json(e.to_string()))?;
        if probe.version != MODEL_FORMAT_VERSION {
            return Err(ModelLoadError::Classify(ClassifyError::UnsupportedVersion(probe.version)));
        }
        serde_json::from_str(text).map_err(|e| ModelLoadError::Json(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelLoadError {
    #[error("model document is not valid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{train_logistic, train_tree, Dataset, LogisticParams, TreeParams};

    fn d() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 0.5]],
            vec![0, 0, 1, 1],
            vec!["good".into(), "bad".into()],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let data = d();
        for (kind, model) in [
            (ModelKind::Tree, Model::Tree(train_tree(&data, &TreeParams::default()).unwrap())),
            (ModelKind::Logistic, Model::Logistic(train_logistic(&data, &LogisticParams::default()).unwrap())),
        ] {
            let mut doc = ModelDocument::new(kind, data.class_names.clone(), vec![], model);
            doc.split = Some(SplitInfo { seed: 3, train_fraction: 0.5 });
            let back = ModelDocument::from_json(&doc.to_json()).unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.model.predict_all(&data.features), doc.model.predict_all(&data.features));
        }
    }

    #[test]
    fn version_checked() {
        let doc = ModelDocument::new(
            ModelKind::Tree,
            vec!["a".into()],
            vec![],
            Model::Tree(TreeNode::Leaf { class_counts: vec![1], predicted_class: 0 }),
        );
        let text = doc.to_json().replace("\"version\": 1", "\"version\": 9");
        assert_eq!(
            ModelDocument::from_json(&text),
            Err(ModelLoadError::Classify(ClassifyError::UnsupportedVersion(9)))
        );
        assert!(matches!(ModelDocument::from_json("{"), Err(ModelLoadError::Json(_))));
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("random-forest".parse::<ModelKind>().unwrap(), ModelKind::RandomForest);
    }
}
