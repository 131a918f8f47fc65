use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifyError, Dataset};

/// Per-feature z-score transform fitted on training data. Constant
/// features get a unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if *s == 0.0 || !s.is_finite() {
                *s = 1.0;
            }
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.1,
            epochs: 1000,
            l2: 1e-3,
        }
    }
}

/// Binary logistic regression on standardized features. Class index 1 is
/// the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardizer,
}

impl LogisticModel {
    /// Probability of class 1.
    pub fn probability(&self, row: &[f64]) -> f64 {
        let x = self.standardization.apply(row);
        sigmoid(dot(&self.weights, &x) + self.bias)
    }
}

impl Classifier for LogisticModel {
    fn predict(&self, row: &[f64]) -> usize {
        usize::from(self.probability(row) >= 0.5)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood plus `l2/2 * |w|^2` (bias unpenalized),
/// with its gradient in `w` and in the bias.
pub fn loss_and_gradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &target) in x.iter().zip(y) {
        let z = dot(weights, row) + bias;
        loss += softplus(z) - target * z;
        let r = (sigmoid(z) - target) / n;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad_b += r;
    }
    loss /= n;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, grad, grad_b)
}

pub fn train_logistic(data: &Dataset, params: &LogisticParams) -> Result<LogisticModel, ClassifyError> {
    train_logistic_with_history(data, params).map(|(m, _)| m)
}

/// Full-batch gradient descent from zero weights. Also returns the loss
/// before every update and after the last one.
pub fn train_logistic_with_history(
    data: &Dataset,
    params: &LogisticParams,
) -> Result<(LogisticModel, Vec<f64>), ClassifyError> {
    if data.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let counts = data.class_counts();
    if counts.len() != 2 || counts.contains(&0) {
        return Err(ClassifyError::SingleClass);
    }
    let standardization = Standardizer::fit(&data.features);
    let x: Vec<Vec<f64>> = data.features.iter().map(|r| standardization.apply(r)).collect();
    let y: Vec<f64> = data.labels.iter().map(|&l| l as f64).collect();

    let mut w = vec![0.0; data.n_features()];
    let mut b = 0.0;
    let mut history = Vec::with_capacity(params.epochs + 1);
    for _ in 0..params.epochs {
        let (loss, g, gb) = loss_and_gradient(&w, b, &x, &y, params.l2);
        history.push(loss);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= params.learning_rate * gi;
        }
        b -= params.learning_rate * gb;
    }
    history.push(loss_and_gradient(&w, b, &x, &y, params.l2).0);
    Ok((
        LogisticModel {
            weights: w,
            bias: b,
            standardization,
        },
        history,
    ))
}
