//! From-scratch classifiers over summary-statistic feature vectors:
//! Gini decision trees, bagged trees, random forests, logistic regression
//! and Gaussian naive Bayes, plus evaluation metrics, balanced splitting and
//! windowed time-series classification.

mod bayes;
mod forest;
mod logistic;
mod metrics;
mod model;
mod split;
mod tree;
mod windows;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bayes::{train_naive_bayes, GaussianNaiveBayes};
pub use forest::{train_ensemble, EnsembleParams, ForestModel};
pub use logistic::{loss_and_gradient, train_logistic, train_logistic_with_history, LogisticModel, LogisticParams, Standardizer};
pub use metrics::{evaluate, ClassMetrics, EvalReport};
pub use model::{Model, ModelDocument, ModelKind, ModelLoadError, SplitInfo, MODEL_FORMAT_VERSION};
pub use split::balanced_split;
pub use tree::{gini_impurity, train_tree, FeatureSubset, TreeNode, TreeParams};
pub use windows::{classify_windows, windowed_features, WindowVote};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("node has no instances")]
    EmptyNode,
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("row {row} has {found} features, expected {expected}")]
    ShapeMismatch { row: usize, expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("label {label} at row {row} has no class name")]
    UnknownLabel { row: usize, label: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("binary model needs exactly two populated classes")]
    SingleClass,
    #[error("class `{0}` has no instances")]
    EmptyClass(String),
    #[error("class `{0}` has fewer than 2 instances")]
    ClassTooSmall(String),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("ensemble needs at least one tree")]
    NoTrees,
    #[error("window does not fit in the trajectory (or no windows to classify)")]
    WindowTooLong,
    #[error("window must span at least two sample periods and stride must be positive")]
    WindowTooShort,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

/// Anything that maps a feature row to a class index.
pub trait Classifier {
    fn predict(&self, row: &[f64]) -> usize;

    fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
    /// Optional per-row identifiers (sortie ids).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, ClassifyError> {
        let d = Dataset {
            features,
            labels,
            class_names,
            feature_names: Vec::new(),
            ids: Vec::new(),
        };
        d.check()?;
        Ok(d)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        self.ids = ids;
        self
    }

    /// Re-checks the invariants; used after deserializing.
    pub fn check(&self) -> Result<(), ClassifyError> {
        if self.features.len() != self.labels.len() {
            return Err(ClassifyError::LabelCount {
                rows: self.features.len(),
                labels: self.labels.len(),
            });
        }
        let width = self.features.first().map_or(0, Vec::len);
        for (row, (f, &label)) in self.features.iter().zip(&self.labels).enumerate() {
            if f.len() != width {
                return Err(ClassifyError::ShapeMismatch {
                    row,
                    expected: width,
                    found: f.len(),
                });
            }
            if let Some(col) = f.iter().position(|v| !v.is_finite()) {
                return Err(ClassifyError::NonFinite { row, col });
            }
            if label >= self.class_names.len() {
                return Err(ClassifyError::UnknownLabel { row, label });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order, keeping names.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            ids: if self.ids.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.ids[i].clone()).collect()
            },
        }
    }
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
