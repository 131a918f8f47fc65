use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifyError, Dataset};

const VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class independent normal likelihoods with empirical priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    pub class_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GaussianNaiveBayes {
    /// Unnormalized log posterior for each class.
    pub fn log_scores(&self, row: &[f64]) -> Vec<f64> {
        self.class_priors
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((prior, mean), var)| {
                prior.ln()
                    + row
                        .iter()
                        .zip(mean)
                        .zip(var)
                        .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
                        .sum::<f64>()
            })
            .collect()
    }
}

impl Classifier for GaussianNaiveBayes {
    fn predict(&self, row: &[f64]) -> usize {
        let scores = self.log_scores(row);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }
}

pub fn train_naive_bayes(data: &Dataset) -> Result<GaussianNaiveBayes, ClassifyError> {
    if data.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let counts = data.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifyError::EmptyClass(data.class_names[k].clone()));
    }
    let p = data.n_features();
    let k = data.n_classes();
    let mut means = vec![vec![0.0; p]; k];
    for (row, &l) in data.features.iter().zip(&data.labels) {
        for (m, v) in means[l].iter_mut().zip(row) {
            *m += v / counts[l] as f64;
        }
    }
    let mut variances = vec![vec![0.0; p]; k];
    for (row, &l) in data.features.iter().zip(&data.labels) {
        for ((s, v), m) in variances[l].iter_mut().zip(row).zip(&means[l]) {
            *s += (v - m).powi(2) / counts[l] as f64;
        }
    }
    for v in variances.iter_mut().flatten() {
        *v = v.max(VARIANCE_FLOOR);
    }
    let n = data.len() as f64;
    Ok(GaussianNaiveBayes {
        class_priors: counts.iter().map(|&c| c as f64 / n).collect(),
        means,
        variances,
    })
}
