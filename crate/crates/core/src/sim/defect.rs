use serde::{Deserialize, Serialize};

use super::SimError;
use crate::irregularity::FlagKind;
use crate::trajectory::{EmbeddedTemplate, Sample, Trajectory};

/// Altitude of an injected ground-idle stretch, meters.
const IDLE_ALTITUDE: f64 = 0.3;
/// Speed of an injected ground-idle stretch, m/s.
const IDLE_SPEED: f64 = 0.5;
/// Lowest derived speed inside a compressed stretch, m/s.
const COMPRESSED_SPEED_MIN: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    Teleport,
    ImpossibleSpeed,
    FrozenMidair,
    GroundIdle,
    StraightLineOnly,
}

impl DefectKind {
    pub const ALL: [DefectKind; 5] = [
        DefectKind::Teleport,
        DefectKind::ImpossibleSpeed,
        DefectKind::FrozenMidair,
        DefectKind::GroundIdle,
        DefectKind::StraightLineOnly,
    ];

    /// Report category the detectors should assign, if any. A straight
    /// line is physically plausible; only the sorter catches it.
    pub fn expected_flag(self) -> Option<FlagKind> {
        match self {
            DefectKind::Teleport | DefectKind::ImpossibleSpeed => Some(FlagKind::TeleportationOrImpossibleSpeed),
            DefectKind::FrozenMidair => Some(FlagKind::IrregularStopping),
            DefectKind::GroundIdle => Some(FlagKind::TaxiingOrStopped),
            DefectKind::StraightLineOnly => None,
        }
    }
}

/// `magnitude` is meters of eastward jump (teleport), seconds of
/// compressed, frozen or idle time, or the line's speed in m/s
/// (straight_line_only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    pub at: f64,
    pub magnitude: f64,
}

pub fn inject_defect(traj: &Trajectory, defect: &DefectSpec) -> Result<Trajectory, SimError> {
    let out_of_range = |what: String| Err(SimError::DefectOutOfRange(what));
    if !(defect.at >= traj.t_first() && defect.at <= traj.t_last()) {
        return out_of_range(format!("at = {} outside [{}, {}]", defect.at, traj.t_first(), traj.t_last()));
    }
    if !(defect.magnitude > 0.0 && defect.magnitude.is_finite()) {
        return out_of_range(format!("magnitude {} must be positive", defect.magnitude));
    }
    let s = traj.samples();
    let dt = traj.native_period();
    let (samples, remap): (Vec<Sample>, Box<dyn Fn(f64) -> f64>) = match defect.kind {
        DefectKind::Teleport => {
            if defect.at >= traj.t_last() {
                return out_of_range("teleport needs a sample after `at`".into());
            }
            let out = s
                .iter()
                .map(|p| Sample {
                    x_east: if p.t > defect.at { p.x_east + defect.magnitude } else { p.x_east },
                    ..*p
                })
                .collect();
            (out, Box::new(|t| t))
        }
        DefectKind::ImpossibleSpeed => {
            let (a, m) = (defect.at, defect.magnitude);
            if a + m > traj.t_last() {
                return out_of_range(format!("compressed stretch [{a}, {}] runs past the end", a + m));
            }
            let lo = s.partition_point(|p| p.t < a);
            let hi = s.partition_point(|p| p.t <= a + m);
            if hi - lo < 2 {
                return out_of_range("compressed stretch holds fewer than two samples".into());
            }
            let min_speed = traj.derived_speeds().total[lo..hi - 1].iter().copied().fold(f64::INFINITY, f64::min);
            if !(min_speed > 0.0) {
                return out_of_range("no motion to compress".into());
            }
            let c = (min_speed / COMPRESSED_SPEED_MIN).min(1.0);
            let remap = move |t: f64| {
                if t < a {
                    t
                } else if t <= a + m {
                    a + (t - a) * c
                } else {
                    t - m * (1.0 - c)
                }
            };
            let out = s.iter().map(|p| Sample { t: remap(p.t), ..*p }).collect();
            (out, Box::new(remap))
        }
        DefectKind::FrozenMidair => {
            let n = (defect.magnitude / dt).round() as usize;
            if n == 0 {
                return out_of_range("freeze shorter than one sample period".into());
            }
            let i = s.partition_point(|p| p.t <= defect.at) - 1;
            let shift = n as f64 * dt;
            let mut out = s[..=i].to_vec();
            let hold = Sample {
                vx: 0.0,
                vy: 0.0,
                vz: 0.0,
                pitch: 0.0,
                roll: 0.0,
                ..s[i]
            };
            out.extend((1..=n).map(|j| Sample {
                t: s[i].t + j as f64 * dt,
                ..hold
            }));
            out.extend(s[i + 1..].iter().map(|p| Sample { t: p.t + shift, ..*p }));
            let ti = s[i].t;
            (out, Box::new(move |t| if t > ti { t + shift } else { t }))
        }
        DefectKind::GroundIdle => {
            let n = (defect.magnitude / dt).round() as usize;
            if n == 0 {
                return out_of_range("idle shorter than one sample period".into());
            }
            let first = s[0];
            let g = first.vx.hypot(first.vy);
            let (ue, un) = if g > 0.0 {
                (first.vx / g, first.vy / g)
            } else {
                let h = first.heading.to_radians();
                (h.sin(), h.cos())
            };
            let shift = n as f64 * dt;
            let mut out: Vec<Sample> = (0..n)
                .map(|j| {
                    let back = IDLE_SPEED * (n - j) as f64 * dt;
                    Sample {
                        t: first.t + j as f64 * dt,
                        x_east: first.x_east - ue * back,
                        y_north: first.y_north - un * back,
                        z_up: IDLE_ALTITUDE,
                        vx: ue * IDLE_SPEED,
                        vy: un * IDLE_SPEED,
                        vz: 0.0,
                        heading: ue.atan2(un).to_degrees(),
                        pitch: 0.0,
                        roll: 0.0,
                    }
                })
                .collect();
            out.extend(s.iter().map(|p| Sample { t: p.t + shift, ..*p }));
            (out, Box::new(move |t| t + shift))
        }
        DefectKind::StraightLineOnly => {
            let speed = defect.magnitude;
            let first = s[0];
            let h = first.heading.to_radians();
            let (vx, vy) = (speed * h.sin(), speed * h.cos());
            let out = s
                .iter()
                .map(|p| {
                    let el = p.t - first.t;
                    Sample {
                        t: p.t,
                        x_east: first.x_east + vx * el,
                        y_north: first.y_north + vy * el,
                        z_up: first.z_up,
                        vx,
                        vy,
                        vz: 0.0,
                        heading: first.heading,
                        pitch: 0.0,
                        roll: 0.0,
                    }
                })
                .collect();
            let tr = Trajectory::new(traj.sortie_id(), out)?;
            return Ok(carry_source(tr, traj));
        }
    };
    let embedded: Vec<EmbeddedTemplate> = traj
        .embedded()
        .iter()
        .map(|e| EmbeddedTemplate {
            name: e.name.clone(),
            t_start: remap(e.t_start),
            t_end: remap(e.t_end),
        })
        .collect();
    let tr = Trajectory::new(traj.sortie_id(), samples)?.with_embedded(embedded);
    Ok(carry_source(tr, traj))
}

fn carry_source(tr: Trajectory, from: &Trajectory) -> Trajectory {
    match from.source() {
        Some(p) => tr.with_source(p),
        None => tr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregularity::{
        detect_impossible_speed, detect_irregular_stop, detect_taxiing, detect_teleport, label_sortie, DetectorConfig,
    };
    use crate::sim::{gen_good_sortie, SegmentKind, SegmentSpec};

    fn host() -> Trajectory {
        gen_good_sortie(
            5,
            &[
                SegmentSpec::new(SegmentKind::Climb { speed: 100.0, rate: 10.0 }, 20.0),
                SegmentSpec::new(SegmentKind::ConstantRateTurn { speed: 100.0, turn_rate: 3.0 }, 60.0).with_transition(4.0),
                SegmentSpec::new(SegmentKind::LevelCruise { speed: 100.0, heading: None }, 60.0).with_transition(4.0),
            ],
            0.2,
        )
        .unwrap()
    }

    fn spec(kind: DefectKind, at: f64, magnitude: f64) -> DefectSpec {
        DefectSpec { kind, at, magnitude }
    }

    #[test]
    fn host_is_clean() {
        assert!(label_sortie(&host(), &DetectorConfig::default()).clean);
    }

    #[test]
    fn teleport_flags_one_event_at_time() {
        let cfg = DetectorConfig::default();
        let tr = inject_defect(&host(), &spec(DefectKind::Teleport, 60.0, 5000.0)).unwrap();
        let f = detect_teleport(&tr, &cfg);
        assert_eq!(f.len(), 1);
        assert!((f[0].t_start - 60.0).abs() < 1e-9);
    }

    #[test]
    fn ground_idle_flags_taxi() {
        let tr = inject_defect(&host(), &spec(DefectKind::GroundIdle, 0.0, 30.0)).unwrap();
        let f = detect_taxiing(&tr, &DetectorConfig::default());
        assert_eq!(f.len(), 1);
        assert!(f[0].t_end - f[0].t_start >= 30.0 - 1e-9);
        assert_eq!(tr.samples()[150].position(), host().samples()[0].position());
    }

    #[test]
    fn frozen_midair_flags_irregular_stop() {
        let h = host();
        let at = 100.0;
        assert!(h.samples()[500].z_up > 100.0);
        let tr = inject_defect(&h, &spec(DefectKind::FrozenMidair, at, 10.0)).unwrap();
        let f = detect_irregular_stop(&tr, &DetectorConfig::default());
        assert_eq!(f.len(), 1);
        assert!((f[0].t_start - at).abs() < 1e-9);
        assert!(f[0].t_end - f[0].t_start >= 10.0 - 1e-9);
        assert!((tr.duration() - h.duration() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn compressed_stretch_is_impossible() {
        let h = host();
        let tr = inject_defect(&h, &spec(DefectKind::ImpossibleSpeed, 50.0, 5.0)).unwrap();
        let f = detect_impossible_speed(&tr, &DetectorConfig::default());
        assert_eq!(f.len(), 1);
        assert!((f[0].t_start - 50.0).abs() < 1e-9);
        assert!(tr.duration() < h.duration());
        assert!(detect_teleport(&tr, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn straight_line_has_no_roll_and_no_flags() {
        let tr = inject_defect(&host(), &spec(DefectKind::StraightLineOnly, 0.0, 90.0)).unwrap();
        assert!(tr.samples().iter().all(|s| s.roll == 0.0));
        assert!(label_sortie(&tr, &DetectorConfig::default()).clean);
        assert_eq!(tr.len(), host().len());
    }

    #[test]
    fn out_of_range_rejected() {
        let h = host();
        for d in [
            spec(DefectKind::Teleport, -1.0, 100.0),
            spec(DefectKind::Teleport, 1e6, 100.0),
            spec(DefectKind::Teleport, h.t_last(), 100.0),
            spec(DefectKind::ImpossibleSpeed, h.t_last() - 1.0, 5.0),
            spec(DefectKind::FrozenMidair, 10.0, 0.0),
        ] {
            assert!(matches!(inject_defect(&h, &d), Err(SimError::DefectOutOfRange(_))), "{d:?}");
        }
    }
}
