use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifyError, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub support: usize,
}

/// One-vs-rest metrics, macro-averaged over the classes that appear in the
/// truth or the predictions. A ratio whose denominator is zero counts as 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub average_f1: f64,
    pub average_specificity: f64,
    pub average_recall: f64,
    /// `confusion_matrix[truth][predicted]`.
    pub confusion_matrix: Vec<Vec<usize>>,
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], class_names: &[String]) -> Result<Self, ClassifyError> {
        if truth.is_empty() {
            return Err(ClassifyError::EmptyDataset);
        }
        if truth.len() != predicted.len() {
            return Err(ClassifyError::LabelCount {
                rows: predicted.len(),
                labels: truth.len(),
            });
        }
        let k = class_names.len();
        let mut cm = vec![vec![0usize; k]; k];
        for (row, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
            if t >= k || p >= k {
                return Err(ClassifyError::UnknownLabel { row, label: t.max(p) });
            }
            cm[t][p] += 1;
        }
        let n = truth.len();
        let correct: usize = (0..k).map(|i| cm[i][i]).sum();
        let mut per_class = Vec::new();
        for c in 0..k {
            let tp = cm[c][c];
            let support: usize = cm[c].iter().sum();
            let predicted_c: usize = (0..k).map(|t| cm[t][c]).sum();
            if support == 0 && predicted_c == 0 {
                continue;
            }
            let fp = predicted_c - tp;
            let fn_ = support - tp;
            let tn = n - tp - fp - fn_;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if 2 * tp + fp + fn_ == 0 {
                1.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            };
            per_class.push(ClassMetrics {
                class_name: class_names[c].clone(),
                precision,
                recall,
                specificity: ratio(tn, tn + fp),
                f1,
                support,
            });
        }
        let m = per_class.len() as f64;
        let avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / m;
        Ok(EvalReport {
            accuracy: correct as f64 / n as f64,
            average_f1: avg(|c| c.f1),
            average_specificity: avg(|c| c.specificity),
            average_recall: avg(|c| c.recall),
            confusion_matrix: cm,
            class_names: class_names.to_vec(),
            per_class,
        })
    }
}

pub fn evaluate(model: &(impl Classifier + ?Sized), test: &Dataset) -> Result<EvalReport, ClassifyError> {
    let predicted = model.predict_all(&test.features);
    EvalReport::from_predictions(&test.labels, &predicted, &test.class_names)
}
