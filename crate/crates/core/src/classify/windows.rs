use serde::{Deserialize, Serialize};

use super::{argmax_count, Classifier, ClassifyError};
use crate::summary::{compute_summary, SummaryFeatures};
use crate::trajectory::Trajectory;

/// Summary features of each window `[t0 + k*stride, t0 + k*stride + window]`
/// that fits entirely inside the trajectory.
pub fn windowed_features(traj: &Trajectory, window: f64, stride: f64) -> Result<Vec<SummaryFeatures>, ClassifyError> {
    if !(stride > 0.0 && stride.is_finite()) || !(window >= 2.0 * traj.native_period()) {
        return Err(ClassifyError::WindowTooShort);
    }
    let span = traj.duration();
    let eps = 1e-9 * (1.0 + span);
    if window > span + eps {
        return Err(ClassifyError::WindowTooLong);
    }
    let count = ((span - window + eps) / stride).floor() as usize + 1;
    let t0 = traj.t_first();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = t0 + k as f64 * stride;
        if let Some(w) = traj.window(start, start + window) {
            out.push(compute_summary(&w));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVote {
    pub per_window: Vec<usize>,
    pub votes: Vec<usize>,
    /// Most frequent window class; ties go to the lowest index.
    pub majority: usize,
}

pub fn classify_windows(
    model: &(impl Classifier + ?Sized),
    n_classes: usize,
    windows: &[SummaryFeatures],
) -> Result<WindowVote, ClassifyError> {
    if windows.is_empty() {
        return Err(ClassifyError::WindowTooLong);
    }
    let per_window: Vec<usize> = windows.iter().map(|w| model.predict(&w.values)).collect();
    let mut votes = vec![0; n_classes.max(per_window.iter().max().map_or(0, |m| m + 1))];
    for &c in &per_window {
        votes[c] += 1;
    }
    Ok(WindowVote {
        majority: argmax_count(&votes),
        per_window,
        votes,
    })
}
