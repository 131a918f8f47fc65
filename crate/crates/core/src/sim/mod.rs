//! Synthetic sortie generator.
//!
//! Good sorties are integrated from maneuver segments with explicit Euler
//! steps, so each recorded velocity is exactly the one that carried the
//! aircraft to the next sample. Bad sorties are good ones with a defect
//! injected. Maneuver templates can be spliced into a host sortie.

mod corpus;
mod defect;
mod embed;

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Sample, Trajectory, TrajectoryError};

pub use corpus::{
    gen_corpus, gen_corpus_with, index_corpus, random_segments, ratio_split, CorpusEntry, CorpusManifest, CorpusOptions,
    ManifestEntry,
};
pub use defect::{inject_defect, DefectKind, DefectSpec};
pub use embed::embed_template;

pub const GRAVITY: f64 = 9.80665;
pub const DEFAULT_DT: f64 = 0.2;
/// Exclusive bounds on segment airspeed, m/s.
pub const SPEED_RANGE: (f64, f64) = (30.0, 160.0);

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no segments given")]
    NoSegments,
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("defect out of range: {0}")]
    DefectOutOfRange(String),
    #[error("template does not fit: {0}")]
    DoesNotFit(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Maneuver primitive. Turn rates are deg/s, positive to the right; climb
/// and descent rates are positive m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    LevelCruise {
        speed: f64,
        /// Snaps the heading at segment start when given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heading: Option<f64>,
    },
    ConstantRateTurn { speed: f64, turn_rate: f64 },
    Climb { speed: f64, rate: f64 },
    Descent { speed: f64, rate: f64 },
    /// Turn rate `turn_rate * sin(2 pi tau / period)`.
    STurn { speed: f64, turn_rate: f64, period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    #[serde(flatten)]
    pub kind: SegmentKind,
    pub duration: f64,
    /// Seconds over which speed, turn rate and vertical speed ease in from
    /// the previous segment's final values.
    #[serde(default)]
    pub transition: f64,
}

impl SegmentSpec {
    pub fn new(kind: SegmentKind, duration: f64) -> Self {
        SegmentSpec {
            kind,
            duration,
            transition: 0.0,
        }
    }

    pub fn with_transition(mut self, seconds: f64) -> Self {
        self.transition = seconds;
        self
    }

    pub fn speed(&self) -> f64 {
        match self.kind {
            SegmentKind::LevelCruise { speed, .. }
            | SegmentKind::ConstantRateTurn { speed, .. }
            | SegmentKind::Climb { speed, .. }
            | SegmentKind::Descent { speed, .. }
            | SegmentKind::STurn { speed, .. } => speed,
        }
    }

    fn check(&self, index: usize) -> Result<(), SimError> {
        let bad = |reason: String| Err(SimError::InvalidSegment { index, reason });
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if !(self.transition >= 0.0 && self.transition <= self.duration) {
            return bad(format!("transition {} must lie in [0, duration]", self.transition));
        }
        let speed = self.speed();
        if !(speed > SPEED_RANGE.0 && speed < SPEED_RANGE.1) {
            return bad(format!("speed {speed} outside ({}, {}) m/s", SPEED_RANGE.0, SPEED_RANGE.1));
        }
        match self.kind {
            SegmentKind::LevelCruise { heading, .. } => {
                if heading.is_some_and(|h| !h.is_finite()) {
                    return bad("heading must be finite".into());
                }
            }
            SegmentKind::ConstantRateTurn { turn_rate, .. } => {
                if !turn_rate.is_finite() {
                    return bad("turn rate must be finite".into());
                }
            }
            SegmentKind::Climb { rate, .. } | SegmentKind::Descent { rate, .. } => {
                if !(rate > 0.0 && rate < speed) {
                    return bad(format!("vertical rate {rate} must lie in (0, speed)"));
                }
            }
            SegmentKind::STurn { turn_rate, period, .. } => {
                if !turn_rate.is_finite() || !(period > 0.0 && period.is_finite()) {
                    return bad("s-turn needs a finite rate and positive period".into());
                }
            }
        }
        Ok(())
    }

    /// Commanded state at `tau` seconds into the segment, before easing.
    fn target(&self, tau: f64) -> Controls {
        match self.kind {
            SegmentKind::LevelCruise { speed, .. } => Controls::new(speed, 0.0, 0.0),
            SegmentKind::ConstantRateTurn { speed, turn_rate } => Controls::new(speed, turn_rate, 0.0),
            SegmentKind::Climb { speed, rate } => Controls::new(speed, 0.0, rate),
            SegmentKind::Descent { speed, rate } => Controls::new(speed, 0.0, -rate),
            SegmentKind::STurn {
                speed,
                turn_rate,
                period,
            } => Controls::new(speed, turn_rate * (2.0 * PI * tau / period).sin(), 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Controls {
    speed: f64,
    turn_rate: f64,
    vz: f64,
}

impl Controls {
    fn new(speed: f64, turn_rate: f64, vz: f64) -> Self {
        Controls { speed, turn_rate, vz }
    }

    fn blend(self, to: Controls, w: f64) -> Controls {
        Controls {
            speed: self.speed + (to.speed - self.speed) * w,
            turn_rate: self.turn_rate + (to.turn_rate - self.turn_rate) * w,
            vz: self.vz + (to.vz - self.vz) * w,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Low-frequency horizontal position wobble, zero at t = 0.
#[derive(Debug, Clone, Copy)]
struct SmoothNoise {
    amp: [f64; 2],
    period: [f64; 2],
    phase: [f64; 2],
}

impl SmoothNoise {
    const MAX_AMP: f64 = 0.2;

    fn draw(rng: &mut impl Rng) -> Self {
        let mut one = || {
            (
                rng.gen_range(0.0..Self::MAX_AMP),
                rng.gen_range(60.0..180.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        };
        let (a0, p0, f0) = one();
        let (a1, p1, f1) = one();
        SmoothNoise {
            amp: [a0, a1],
            period: [p0, p1],
            phase: [f0, f1],
        }
    }

    fn at(&self, t: f64) -> [f64; 2] {
        let w = |i: usize| self.amp[i] * ((2.0 * PI * t / self.period[i] + self.phase[i]).sin() - self.phase[i].sin());
        [w(0), w(1)]
    }
}

/// Noise-free integration of `segments` from the origin at heading 0
/// (north), ground level, t = 0.
pub fn integrate_segments(segments: &[SegmentSpec], dt: f64) -> Result<Trajectory, SimError> {
    integrate_segments_at(segments, dt, 0.0)
}

/// [`integrate_segments`] starting at `altitude` meters.
pub fn integrate_segments_at(segments: &[SegmentSpec], dt: f64, altitude: f64) -> Result<Trajectory, SimError> {
    if !(altitude >= 0.0 && altitude.is_finite()) {
        return Err(SimError::InvalidSegment {
            index: 0,
            reason: format!("start altitude {altitude} must be finite and non-negative"),
        });
    }
    let samples = integrate(segments, dt, None, altitude)?;
    Ok(Trajectory::new("segments", samples)?)
}

/// Integrates `segments` and adds seeded smooth position noise (under half
/// a meter). Same seed, same output.
pub fn gen_good_sortie(seed: u64, segments: &[SegmentSpec], dt: f64) -> Result<Trajectory, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = SmoothNoise::draw(&mut rng);
    let samples = integrate(segments, dt, Some(noise), 0.0)?;
    Ok(Trajectory::new(format!("sim-{seed}"), samples)?)
}

fn integrate(segments: &[SegmentSpec], dt: f64, noise: Option<SmoothNoise>, altitude: f64) -> Result<Vec<Sample>, SimError> {
    if segments.is_empty() {
        return Err(SimError::NoSegments);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidStep(dt));
    }
    for (i, s) in segments.iter().enumerate() {
        s.check(i)?;
    }

    let mut starts = Vec::with_capacity(segments.len());
    let mut total = 0.0;
    for s in segments {
        starts.push(total);
        total += s.duration;
    }
    // controls each segment eases in from
    let mut entry = Vec::with_capacity(segments.len());
    let mut prev = segments[0].target(0.0);
    for s in segments {
        entry.push(prev);
        prev = s.target(s.duration);
    }

    let steps = (total / dt).round().max(1.0) as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut pos = [0.0, 0.0, altitude];
    let mut heading = 0.0f64;
    let mut seg = 0;
    let mut snapped = vec![false; segments.len()];
    for k in 0..=steps {
        let t = k as f64 * dt;
        while seg + 1 < segments.len() && starts[seg + 1] <= t + 1e-9 * dt {
            seg += 1;
        }
        let spec = &segments[seg];
        let tau = (t - starts[seg]).min(spec.duration);
        if let SegmentKind::LevelCruise { heading: Some(h), .. } = spec.kind {
            if !snapped[seg] {
                heading = h;
                snapped[seg] = true;
            }
        }
        let mut c = spec.target(tau);
        if spec.transition > 0.0 && tau < spec.transition {
            c = entry[seg].blend(c, smoothstep(tau / spec.transition));
        }

        if pos[2] < -1e-6 {
            return Err(SimError::InvalidSegment {
                index: seg,
                reason: format!("altitude reaches {:.3} m, below ground", pos[2]),
            });
        }
        pos[2] = pos[2].max(0.0);

        let vh = (c.speed * c.speed - c.vz * c.vz).max(0.0).sqrt();
        let psi = heading.to_radians();
        let v = [vh * psi.sin(), vh * psi.cos(), c.vz];
        let wobble = noise.map_or([0.0, 0.0], |n| n.at(t));
        samples.push(Sample {
            t,
            x_east: pos[0] + wobble[0],
            y_north: pos[1] + wobble[1],
            z_up: pos[2],
            vx: v[0],
            vy: v[1],
            vz: v[2],
            heading,
            pitch: c.vz.atan2(vh).to_degrees(),
            roll: (c.speed * c.turn_rate.to_radians() / GRAVITY).atan().to_degrees(),
        });
        for (p, vi) in pos.iter_mut().zip(v) {
            *p += vi * dt;
        }
        heading = (heading + c.turn_rate * dt).rem_euclid(360.0);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregularity::{label_sortie, DetectorConfig};

    fn cruise(speed: f64, heading: f64, duration: f64) -> SegmentSpec {
        SegmentSpec::new(
            SegmentKind::LevelCruise {
                speed,
                heading: Some(heading),
            },
            duration,
        )
    }

    #[test]
    fn straight_cruise_closed_form() {
        let tr = gen_good_sortie(1, &[cruise(100.0, 90.0, 60.0)], 0.2).unwrap();
        let last = tr.samples().last().unwrap();
        assert_eq!(tr.len(), 301);
        assert!((last.x_east - 6000.0).abs() < 0.5);
        assert!(last.y_north.abs() < 0.5);
        let exact = integrate_segments(&[cruise(100.0, 90.0, 60.0)], 0.2).unwrap();
        assert!((exact.samples().last().unwrap().x_east - 6000.0).abs() < 1e-6);
    }

    #[test]
    fn full_circle_closes() {
        let segs = [
            cruise(100.0, 0.0, 10.0),
            SegmentSpec::new(SegmentKind::ConstantRateTurn { speed: 100.0, turn_rate: 3.0 }, 120.0),
        ];
        let tr = gen_good_sortie(4, &segs, 0.2).unwrap();
        let s = tr.samples();
        let a = s[50].position();
        let b = s.last().unwrap().position();
        let gap = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(gap < 5.0, "gap {gap}");
        // 100 m/s at 3 deg/s banks about 28 degrees right
        assert!((s[100].roll - 28.1).abs() < 0.2);
    }

    #[test]
    fn climb_geometry() {
        let segs = [SegmentSpec::new(SegmentKind::Climb { speed: 100.0, rate: 10.0 }, 30.0)];
        let tr = integrate_segments(&segs, 0.2).unwrap();
        let s = tr.samples();
        assert!((s.last().unwrap().z_up - 300.0).abs() < 1e-9);
        assert!((s[3].pitch - (10.0f64).atan2(99.0f64.sqrt() * 10.0).to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn velocity_matches_position_steps() {
        let segs = [
            SegmentSpec::new(SegmentKind::Climb { speed: 90.0, rate: 8.0 }, 40.0),
            SegmentSpec::new(SegmentKind::STurn { speed: 110.0, turn_rate: 6.0, period: 30.0 }, 60.0).with_transition(5.0),
            SegmentSpec::new(SegmentKind::Descent { speed: 100.0, rate: 5.0 }, 30.0).with_transition(5.0),
        ];
        let tr = gen_good_sortie(9, &segs, 0.2).unwrap();
        for w in tr.samples().windows(2) {
            let dt = w[1].t - w[0].t;
            let d = [w[1].x_east - w[0].x_east, w[1].y_north - w[0].y_north, w[1].z_up - w[0].z_up];
            let e = [d[0] - w[0].vx * dt, d[1] - w[0].vy * dt, d[2] - w[0].vz * dt];
            assert!((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt() <= 0.1);
        }
        assert!(label_sortie(&tr, &DetectorConfig::default()).clean);
    }

    #[test]
    fn deterministic_per_seed() {
        let segs = [cruise(100.0, 45.0, 20.0)];
        assert_eq!(gen_good_sortie(3, &segs, 0.2).unwrap(), gen_good_sortie(3, &segs, 0.2).unwrap());
        assert_ne!(gen_good_sortie(3, &segs, 0.2).unwrap(), gen_good_sortie(4, &segs, 0.2).unwrap());
    }

    #[test]
    fn invalid_segments_rejected() {
        let slow = [cruise(20.0, 0.0, 10.0)];
        assert!(matches!(gen_good_sortie(0, &slow, 0.2), Err(SimError::InvalidSegment { index: 0, .. })));
        let under = [SegmentSpec::new(SegmentKind::Descent { speed: 100.0, rate: 5.0 }, 10.0)];
        assert!(matches!(gen_good_sortie(0, &under, 0.2), Err(SimError::InvalidSegment { .. })));
        assert!(matches!(gen_good_sortie(0, &[], 0.2), Err(SimError::NoSegments)));
        assert!(matches!(gen_good_sortie(0, &[cruise(100.0, 0.0, 5.0)], 0.0), Err(SimError::InvalidStep(_))));
    }

    #[test]
    fn segment_json_shape() {
        let s = SegmentSpec::new(SegmentKind::ConstantRateTurn { speed: 100.0, turn_rate: -4.0 }, 30.0);
        let v: serde_json::Value = serde_json::to_value(s).unwrap();
        assert_eq!(v["kind"], "constant_rate_turn");
        assert_eq!(v["turn_rate"], -4.0);
        let back: SegmentSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
