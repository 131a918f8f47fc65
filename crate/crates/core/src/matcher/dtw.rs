use super::MatchError;

/// Minimal-cost alignment plus the number of cells on the chosen path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub cost: f64,
    pub path_len: usize,
}

/// Classic DTW with cost `|a_i - b_j|`, steps (i-1, j), (i, j-1),
/// (i-1, j-1), both ends pinned. Returns the unnormalized minimal cost.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64, MatchError> {
    dtw_align(a, b).map(|al| al.cost)
}

/// Like [`dtw_distance`], also reporting the path length. Among equal-cost
/// predecessors the diagonal wins, then (i-1, j), then (i, j-1).
pub fn dtw_align(a: &[f64], b: &[f64]) -> Result<Alignment, MatchError> {
    if a.is_empty() || b.is_empty() {
        return Err(MatchError::EmptySequence);
    }
    let m = b.len();
    let mut prev = vec![(f64::INFINITY, 0usize); m];
    let mut cur = vec![(f64::INFINITY, 0usize); m];
    for (i, &x) in a.iter().enumerate() {
        for j in 0..m {
            let c = (x - b[j]).abs();
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, 0);
                if i > 0 && j > 0 {
                    best = prev[j - 1];
                }
                if i > 0 && prev[j].0 < best.0 {
                    best = prev[j];
                }
                if j > 0 && cur[j - 1].0 < best.0 {
                    best = cur[j - 1];
                }
                best
            };
            // cost accumulates forward from (0, 0): S_k = S_{k-1} + c_k
            cur[j] = if i == 0 && j == 0 { (c, 1) } else { (best.0 + c, best.1 + 1) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, path_len) = prev[m - 1];
    Ok(Alignment { cost, path_len })
}
