use serde::{Deserialize, Serialize};

use super::MatchError;
use crate::trajectory::{Channel, Trajectory};

/// Pearson correlations between channels, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub channels: Vec<Channel>,
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    /// Correlations of equal-length series. A series with (numerically)
    /// zero variance correlates 0 with the others and 1 with itself.
    pub fn from_series(channels: Vec<Channel>, series: &[Vec<f64>]) -> Self {
        let k = series.len();
        let centered: Vec<(Vec<f64>, f64)> = series
            .iter()
            .map(|s| {
                let n = s.len() as f64;
                let mean = s.iter().sum::<f64>() / n;
                let c: Vec<f64> = s.iter().map(|v| v - mean).collect();
                let ss = c.iter().map(|v| v * v).sum::<f64>();
                let constant = (ss / n).sqrt() <= 1e-9 * (1.0 + mean.abs());
                (c, if constant { 0.0 } else { ss.sqrt() })
            })
            .collect();
        let mut values = vec![0.0; k * k];
        for i in 0..k {
            values[i * k + i] = 1.0;
            for j in i + 1..k {
                let (ci, ni) = &centered[i];
                let (cj, nj) = &centered[j];
                let r = if *ni == 0.0 || *nj == 0.0 {
                    0.0
                } else {
                    (ci.iter().zip(cj).map(|(x, y)| x * y).sum::<f64>() / (ni * nj)).clamp(-1.0, 1.0)
                };
                values[i * k + j] = r;
                values[j * k + i] = r;
            }
        }
        CorrelationMatrix { channels, values }
    }
}

/// Channel series of `traj`, all the same length: raw channels lose their
/// last sample when any derived channel is present.
pub(crate) fn aligned_series(traj: &Trajectory, channels: &[Channel]) -> Vec<Vec<f64>> {
    let mut series: Vec<Vec<f64>> = channels.iter().map(|&c| traj.channel(c)).collect();
    let n = series.iter().map(Vec::len).min().unwrap_or(0);
    for s in &mut series {
        s.truncate(n);
    }
    series
}

pub fn correlation_matrix(traj: &Trajectory, channels: &[Channel]) -> Result<CorrelationMatrix, MatchError> {
    if channels.is_empty() {
        return Err(MatchError::NoChannels);
    }
    Ok(CorrelationMatrix::from_series(channels.to_vec(), &aligned_series(traj, channels)))
}

/// `1 - <A, B>_F / (|A|_F |B|_F)`.
pub fn cmd(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<f64, MatchError> {
    if a.dim() != b.dim() {
        return Err(MatchError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na2: f64 = a.values.iter().map(|x| x * x).sum();
    let nb2: f64 = b.values.iter().map(|x| x * x).sum();
    // sqrt(s * s) == s exactly, so cmd(A, A) comes out as exactly zero
    Ok((1.0 - dot / (na2 * nb2).sqrt()).max(0.0))
}
