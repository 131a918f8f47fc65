//! Unsupervised maneuver matching.
//!
//! A template is scored against a sortie two ways: per-channel DTW on the
//! raw series and their first differences (univariate), and the distance
//! between the two correlation matrices (multivariate). Each family is
//! turned into probabilities over templates with a softmax and the two are
//! combined with a weighted geometric mean.

mod correlation;
mod dtw;
mod library;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{first_difference, Channel, Trajectory, TrajectoryError};

pub use correlation::{cmd, correlation_matrix, CorrelationMatrix};
pub use dtw::{dtw_align, dtw_distance, Alignment};
pub use library::{load_template_library, standard_templates, write_template_library, LibraryEntry, STANDARD_CHANNELS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("cannot align an empty sequence")]
    EmptySequence,
    #[error("no channels selected")]
    NoChannels,
    #[error("no templates given")]
    NoTemplates,
    #[error("correlation matrices differ in size ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("invalid template `{name}`: {detail}")]
    InvalidTemplate { name: String, detail: String },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("distance {0} is not finite")]
    NonFiniteDistance(f64),
    #[error("combination weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error("window {window} s exceeds the sortie's {duration} s")]
    WindowTooLong { window: f64, duration: f64 },
    #[error("window {window} s is shorter than half the template ({template} s), or stride is not positive")]
    WindowTooShort { window: f64, template: f64 },
    #[error("template library: {0}")]
    Library(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Exemplar recording of one maneuver and the channels to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverTemplate {
    pub name: String,
    pub trajectory: Trajectory,
    pub channels: Vec<Channel>,
}

impl ManeuverTemplate {
    pub fn new(name: impl Into<String>, trajectory: Trajectory, channels: Vec<Channel>) -> Result<Self, MatchError> {
        let name = name.into();
        if channels.is_empty() {
            return Err(MatchError::InvalidTemplate {
                name,
                detail: "no channels".into(),
            });
        }
        if !(trajectory.duration() > 0.0) {
            return Err(MatchError::InvalidTemplate {
                name,
                detail: "zero duration".into(),
            });
        }
        Ok(ManeuverTemplate {
            name,
            trajectory,
            channels,
        })
    }

    pub fn duration(&self) -> f64 {
        self.trajectory.duration()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub temperature: f64,
    /// Weight of the univariate probabilities in the geometric mean.
    pub combination_weight: f64,
    /// Common resampling step, seconds.
    pub dt: f64,
    /// Z-normalize each series before DTW.
    pub z_normalize: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            temperature: 1.0,
            combination_weight: 0.5,
            dt: 0.5,
            z_normalize: false,
        }
    }
}

impl MatchConfig {
    fn check(&self) -> Result<(), MatchError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(MatchError::InvalidTemperature(self.temperature));
        }
        if !(0.0..=1.0).contains(&self.combination_weight) {
            return Err(MatchError::InvalidWeight(self.combination_weight));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MatchError::Trajectory(TrajectoryError::InvalidStep(self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub template: String,
    /// Sum over channels of path-normalized DTW on raw series.
    pub dtw_raw: f64,
    /// Same on first differences.
    pub dtw_diff: f64,
    pub cmd: f64,
    pub univariate_prob: f64,
    pub multivariate_prob: f64,
    pub combined_prob: f64,
}

impl MatchResult {
    pub fn univariate(&self) -> f64 {
        self.dtw_raw + self.dtw_diff
    }
}

fn z_normalized(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    xs.iter().map(|x| (x - mean) / scale).collect()
}

fn normalized_dtw(a: &[f64], b: &[f64], z: bool) -> Result<f64, MatchError> {
    let al = if z {
        dtw_align(&z_normalized(a), &z_normalized(b))?
    } else {
        dtw_align(a, b)?
    };
    Ok(al.cost / al.path_len as f64)
}

/// `(raw, diff)` parts of the univariate score on already-resampled
/// trajectories.
fn univariate_parts(template: &Trajectory, sortie: &Trajectory, channels: &[Channel], z: bool) -> Result<(f64, f64), MatchError> {
    let mut raw = 0.0;
    let mut diff = 0.0;
    for &ch in channels {
        let a = template.channel(ch);
        let b = sortie.channel(ch);
        raw += normalized_dtw(&a, &b, z)?;
        let (da, db) = (first_difference(&a), first_difference(&b));
        // a single-sample derived series has no differences to compare
        if let (Ok(da), Ok(db)) = (da, db) {
            if !da.is_empty() && !db.is_empty() {
                diff += normalized_dtw(&da, &db, z)?;
            }
        }
    }
    Ok((raw, diff))
}

fn multivariate_on(template: &Trajectory, sortie: &Trajectory, channels: &[Channel]) -> Result<f64, MatchError> {
    cmd(&correlation_matrix(template, channels)?, &correlation_matrix(sortie, channels)?)
}

/// Sum over the template's channels of path-normalized DTW on raw series
/// plus the same on first differences, after resampling both to `cfg.dt`.
pub fn univariate_score(template: &ManeuverTemplate, sortie: &Trajectory, cfg: &MatchConfig) -> Result<f64, MatchError> {
    cfg.check()?;
    let t = template.trajectory.resample(cfg.dt)?;
    let s = sortie.resample(cfg.dt)?;
    let (raw, diff) = univariate_parts(&t, &s, &template.channels, cfg.z_normalize)?;
    Ok(raw + diff)
}

/// Correlation-matrix distance after resampling both to `cfg.dt`.
pub fn multivariate_score(template: &ManeuverTemplate, sortie: &Trajectory, cfg: &MatchConfig) -> Result<f64, MatchError> {
    cfg.check()?;
    let t = template.trajectory.resample(cfg.dt)?;
    let s = sortie.resample(cfg.dt)?;
    multivariate_on(&t, &s, &template.channels)
}

fn log_softmax(distances: &[f64], temperature: f64) -> Result<Vec<f64>, MatchError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(MatchError::InvalidTemperature(temperature));
    }
    if let Some(&d) = distances.iter().find(|d| !d.is_finite()) {
        return Err(MatchError::NonFiniteDistance(d));
    }
    let z: Vec<f64> = distances.iter().map(|d| -d / temperature).collect();
    Ok(log_normalize(&z))
}

fn log_normalize(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn normalized_exp(log_p: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
    let s: f64 = p.iter().sum();
    p.into_iter().map(|v| v / s).collect()
}

/// `p_k = exp(-d_k / T) / sum_j exp(-d_j / T)`, stabilized.
pub fn match_probabilities(distances: &[f64], temperature: f64) -> Result<Vec<f64>, MatchError> {
    if distances.is_empty() {
        return Err(MatchError::NoTemplates);
    }
    Ok(normalized_exp(&log_softmax(distances, temperature)?))
}

/// Scores every template against the sortie and ranks by combined
/// probability (descending, ties by name).
pub fn match_sortie(templates: &[ManeuverTemplate], sortie: &Trajectory, cfg: &MatchConfig) -> Result<Vec<MatchResult>, MatchError> {
    cfg.check()?;
    if templates.is_empty() {
        return Err(MatchError::NoTemplates);
    }
    let s = sortie.resample(cfg.dt)?;
    let scores = templates
        .par_iter()
        .map(|tm| {
            let t = tm.trajectory.resample(cfg.dt)?;
            let (raw, diff) = univariate_parts(&t, &s, &tm.channels, cfg.z_normalize)?;
            let m = multivariate_on(&t, &s, &tm.channels)?;
            Ok((raw, diff, m))
        })
        .collect::<Result<Vec<_>, MatchError>>()?;

    let uni: Vec<f64> = scores.iter().map(|(r, d, _)| r + d).collect();
    let multi: Vec<f64> = scores.iter().map(|s| s.2).collect();
    let lu = log_softmax(&uni, cfg.temperature)?;
    let lm = log_softmax(&multi, cfg.temperature)?;
    let w = cfg.combination_weight;
    let combined: Vec<f64> = lu
        .iter()
        .zip(&lm)
        .map(|(u, m)| {
            // 0 * -inf would poison the sum at the degenerate weights
            let a = if w == 0.0 { 0.0 } else { w * u };
            let b = if w == 1.0 { 0.0 } else { (1.0 - w) * m };
            a + b
        })
        .collect();
    let pc = normalized_exp(&log_normalize(&combined));
    let pu = normalized_exp(&lu);
    let pm = normalized_exp(&lm);

    let mut results: Vec<(f64, MatchResult)> = templates
        .iter()
        .enumerate()
        .map(|(k, tm)| (combined[k], MatchResult {
            template: tm.name.clone(),
            dtw_raw: scores[k].0,
            dtw_diff: scores[k].1,
            cmd: scores[k].2,
            univariate_prob: pu[k],
            multivariate_prob: pm[k],
            combined_prob: pc[k],
        }))
        .collect();
    // rank on the log scale; probabilities can underflow to equal zeros
    results.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.template.cmp(&b.1.template)));
    Ok(results.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub t_start: f64,
    pub t_end: f64,
    pub univariate: f64,
    pub multivariate: f64,
    /// `univariate + multivariate`.
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingMatch {
    pub template: String,
    pub window: f64,
    pub stride: f64,
    pub scores: Vec<WindowScore>,
    /// Index into `scores` of the lowest combined score (earliest on ties).
    pub best: usize,
}

impl RollingMatch {
    pub fn best_window(&self) -> &WindowScore {
        &self.scores[self.best]
    }
}

/// Scores the template against every window `[t0 + k*stride, +window]`
/// that fits in the sortie.
pub fn rolling_match(
    template: &ManeuverTemplate,
    sortie: &Trajectory,
    window: f64,
    stride: f64,
    cfg: &MatchConfig,
) -> Result<RollingMatch, MatchError> {
    cfg.check()?;
    let too_short = MatchError::WindowTooShort {
        window,
        template: template.duration(),
    };
    if !(window >= 0.5 * template.duration()) || !(stride > 0.0 && stride.is_finite()) {
        return Err(too_short);
    }
    let span = sortie.duration();
    let eps = 1e-9 * (1.0 + span);
    if window > span + eps {
        return Err(MatchError::WindowTooLong { window, duration: span });
    }
    let count = ((span - window + eps) / stride).floor() as usize + 1;
    let t = template.trajectory.resample(cfg.dt)?;
    let t0 = sortie.t_first();
    let scores = (0..count)
        .into_par_iter()
        .map(|k| {
            let start = t0 + k as f64 * stride;
            let sub = sortie.window(start, start + window).ok_or_else(|| too_short.clone())?;
            let s = sub.resample(cfg.dt)?;
            let (raw, diff) = univariate_parts(&t, &s, &template.channels, cfg.z_normalize)?;
            let m = multivariate_on(&t, &s, &template.channels)?;
            Ok(WindowScore {
                t_start: start,
                t_end: start + window,
                univariate: raw + diff,
                multivariate: m,
                combined: raw + diff + m,
            })
        })
        .collect::<Result<Vec<_>, MatchError>>()?;
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.combined < scores[b].combined { i } else { b });
    Ok(RollingMatch {
        template: template.name.clone(),
        window,
        stride,
        scores,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{embed_template, gen_good_sortie, SegmentKind, SegmentSpec};

    #[test]
    fn softmax_examples() {
        let p = match_probabilities(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let u = match_probabilities(&[4.0; 5], 0.3).unwrap();
        assert!(u.iter().all(|v| (v - 0.2).abs() < 1e-15));
        let big = match_probabilities(&[1e6, 1e6 + 1.0, -3e5], 1.0).unwrap();
        assert!((big.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(big[2], 1.0);
        assert_eq!(match_probabilities(&[], 1.0), Err(MatchError::NoTemplates));
        assert_eq!(match_probabilities(&[1.0], 0.0), Err(MatchError::InvalidTemperature(0.0)));
        assert!(matches!(match_probabilities(&[f64::NAN], 1.0), Err(MatchError::NonFiniteDistance(_))));
    }

    #[test]
    fn softmax_shift_invariant() {
        let d = [0.3, 1.7, 2.2, 0.9];
        let shifted: Vec<f64> = d.iter().map(|v| v + 123.0).collect();
        let a = match_probabilities(&d, 0.7).unwrap();
        let b = match_probabilities(&shifted, 0.7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn library() -> Vec<ManeuverTemplate> {
        standard_templates(0.2).unwrap()
    }

    fn host_with(template: &ManeuverTemplate, lead: f64, seed: u64) -> Trajectory {
        let base = gen_good_sortie(
            seed,
            &[
                SegmentSpec::new(SegmentKind::Climb { speed: 100.0, rate: 20.0 }, 25.0),
                SegmentSpec::new(SegmentKind::LevelCruise { speed: 100.0, heading: Some(30.0) }, lead + template.duration() + 35.0),
            ],
            0.2,
        )
        .unwrap();
        embed_template(&base, &template.name, &template.trajectory, lead).unwrap()
    }

    #[test]
    fn template_matches_itself() {
        let lib = library();
        let cfg = MatchConfig::default();
        let t = &lib[0];
        assert!(univariate_score(t, &t.trajectory, &cfg).unwrap().abs() < 1e-9);
        assert!(multivariate_score(t, &t.trajectory, &cfg).unwrap().abs() < 1e-12);
        let single = match_sortie(&lib[..1], &t.trajectory, &cfg).unwrap();
        assert_eq!(single[0].combined_prob, 1.0);
    }

    #[test]
    fn offset_channel_changes_raw_term_only() {
        let samples = (0..60)
            .map(|k| {
                let t = k as f64 * 0.5;
                crate::trajectory::Sample { t, vz: (t * 0.4).sin() * 5.0, roll: (t * 0.3).cos() * 20.0, ..Default::default() }
            })
            .collect::<Vec<_>>();
        let a = Trajectory::new("a", samples.clone()).unwrap();
        let b = Trajectory::new("b", samples.into_iter().map(|s| crate::trajectory::Sample { vz: s.vz + 3.0, ..s }).collect()).unwrap();
        let (raw, diff) = univariate_parts(&a, &b, &[Channel::Vz], false).unwrap();
        assert!(raw > 0.0);
        assert!(diff.abs() < 1e-12);
        let one = univariate_parts(&a, &b, &[Channel::Roll], false).unwrap();
        let both = univariate_parts(&a, &b, &[Channel::Vz, Channel::Roll], false).unwrap();
        assert!((both.0 + both.1 - (raw + diff + one.0 + one.1)).abs() < 1e-12);
    }

    #[test]
    fn embedded_template_ranks_first() {
        let lib = library();
        let cfg = MatchConfig::default();
        for (k, t) in lib.iter().enumerate() {
            let sortie = host_with(t, 40.0 + 7.0 * k as f64, k as u64);
            let ranked = match_sortie(&lib, &sortie, &cfg).unwrap();
            assert_eq!(ranked[0].template, t.name, "{ranked:#?}");
            let s: f64 = ranked.iter().map(|r| r.combined_prob).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_weights_follow_single_family() {
        let lib = library();
        let sortie = host_with(&lib[2], 50.0, 9);
        for (w, key) in [(1.0, 0), (0.0, 1)] {
            let cfg = MatchConfig { combination_weight: w, ..Default::default() };
            let ranked = match_sortie(&lib, &sortie, &cfg).unwrap();
            let score = |r: &MatchResult| if key == 0 { r.univariate() } else { r.cmd };
            for pair in ranked.windows(2) {
                assert!(score(&pair[0]) <= score(&pair[1]) + 1e-12);
            }
        }
    }

    #[test]
    fn sharper_temperature_keeps_top1() {
        let lib = library();
        let sortie = host_with(&lib[4], 30.0, 2);
        let top = |temperature| match_sortie(&lib, &sortie, &MatchConfig { temperature, ..Default::default() }).unwrap()[0].template.clone();
        assert_eq!(top(1.0), top(0.1));
        assert_eq!(top(1.0), top(0.01));
    }

    #[test]
    fn rolling_localizes_and_counts() {
        let lib = library();
        let cfg = MatchConfig::default();
        let t = &lib[1];
        let sortie = host_with(t, 120.0, 5);
        let r = rolling_match(t, &sortie, t.duration(), 1.0, &cfg).unwrap();
        let expected = ((sortie.duration() - t.duration()) / 1.0 + 1e-9).floor() as usize + 1;
        assert_eq!(r.scores.len(), expected);
        assert!((r.best_window().t_start - 120.0).abs() <= 2.0, "best at {}", r.best_window().t_start);

        let whole = rolling_match(t, &sortie, sortie.duration(), 1.0, &cfg).unwrap();
        assert_eq!(whole.scores.len(), 1);
        let full = univariate_score(t, &sortie, &cfg).unwrap() + multivariate_score(t, &sortie, &cfg).unwrap();
        assert!((whole.scores[0].combined - full).abs() < 1e-9);

        assert!(matches!(rolling_match(t, &sortie, sortie.duration() + 5.0, 1.0, &cfg), Err(MatchError::WindowTooLong { .. })));
        assert!(matches!(rolling_match(t, &sortie, t.duration() * 0.4, 1.0, &cfg), Err(MatchError::WindowTooShort { .. })));
    }
}
