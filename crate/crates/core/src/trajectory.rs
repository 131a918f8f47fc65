//! Sortie data model: samples, trajectories, channels and the pure
//! operations over them (resampling, differencing, derived speeds).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column headers as they appear in recorder output, in file order.
pub const COLUMN_NAMES: [&str; 10] = [
    "time (sec)",
    "xEast (m)",
    "yNorth (m)",
    "zUp (m)",
    "vx (m/s)",
    "vy (m/s)",
    "vz (m/s)",
    "head (deg)",
    "pitch (deg)",
    "roll (deg)",
];

/// One recorded instant of a sortie. Positions are local east/north/up
/// meters, velocities meters per second, attitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x_east: f64,
    pub y_north: f64,
    pub z_up: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub heading: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Sample {
    /// Values in file column order.
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.t,
            self.x_east,
            self.y_north,
            self.z_up,
            self.vx,
            self.vy,
            self.vz,
            self.heading,
            self.pitch,
            self.roll,
        ]
    }

    pub fn from_array(v: [f64; 10]) -> Self {
        Sample {
            t: v[0],
            x_east: v[1],
            y_north: v[2],
            z_up: v[3],
            vx: v[4],
            vy: v[5],
            vz: v[6],
            heading: v[7],
            pitch: v[8],
            roll: v[9],
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x_east, self.y_north, self.z_up]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.vx, self.vy, self.vz]
    }

    fn normalized(mut self) -> Self {
        self.heading = normalize_heading(self.heading);
        self.roll = normalize_roll(self.roll);
        self
    }
}

/// Maps any angle in degrees onto `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    if (0.0..360.0).contains(&deg) {
        return deg;
    }
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Maps any angle in degrees onto `[-180, 180)`.
pub fn normalize_roll(deg: f64) -> f64 {
    // in-range values pass through untouched; the shift below costs precision
    if (-180.0..180.0).contains(&deg) {
        return deg;
    }
    normalize_heading(deg + 180.0) - 180.0
}

/// Signed smallest rotation from `from` to `to`, in `[-180, 180)` degrees.
pub fn angle_delta(from: f64, to: f64) -> f64 {
    normalize_roll(to - from)
}

/// Named series that can be pulled out of a trajectory.
///
/// Raw channels have one value per sample. Derived channels are computed
/// from position differences and have one value per consecutive sample
/// pair, attributed to the interval start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    XEast,
    YNorth,
    ZUp,
    Vx,
    Vy,
    Vz,
    Heading,
    Pitch,
    Roll,
    GroundSpeed,
    TotalSpeed,
    DerivedVx,
    DerivedVy,
    DerivedVz,
}

impl Channel {
    pub const RAW: [Channel; 9] = [
        Channel::XEast,
        Channel::YNorth,
        Channel::ZUp,
        Channel::Vx,
        Channel::Vy,
        Channel::Vz,
        Channel::Heading,
        Channel::Pitch,
        Channel::Roll,
    ];

    pub const ALL: [Channel; 14] = [
        Channel::XEast,
        Channel::YNorth,
        Channel::ZUp,
        Channel::Vx,
        Channel::Vy,
        Channel::Vz,
        Channel::Heading,
        Channel::Pitch,
        Channel::Roll,
        Channel::GroundSpeed,
        Channel::TotalSpeed,
        Channel::DerivedVx,
        Channel::DerivedVy,
        Channel::DerivedVz,
    ];

    pub fn is_derived(self) -> bool {
        matches!(
            self,
            Channel::GroundSpeed
                | Channel::TotalSpeed
                | Channel::DerivedVx
                | Channel::DerivedVy
                | Channel::DerivedVz
        )
    }

    /// Column name as the recorder writes it, without the unit; derived
    /// channels use camel case in the same style.
    pub fn recorder_name(self) -> &'static str {
        match self {
            Channel::XEast => "xEast",
            Channel::YNorth => "yNorth",
            Channel::ZUp => "zUp",
            Channel::Vx => "vx",
            Channel::Vy => "vy",
            Channel::Vz => "vz",
            Channel::Heading => "head",
            Channel::Pitch => "pitch",
            Channel::Roll => "roll",
            Channel::GroundSpeed => "groundSpeed",
            Channel::TotalSpeed => "totalSpeed",
            Channel::DerivedVx => "derivedVx",
            Channel::DerivedVy => "derivedVy",
            Channel::DerivedVz => "derivedVz",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::XEast => "x_east",
            Channel::YNorth => "y_north",
            Channel::ZUp => "z_up",
            Channel::Vx => "vx",
            Channel::Vy => "vy",
            Channel::Vz => "vz",
            Channel::Heading => "heading",
            Channel::Pitch => "pitch",
            Channel::Roll => "roll",
            Channel::GroundSpeed => "ground_speed",
            Channel::TotalSpeed => "total_speed",
            Channel::DerivedVx => "derived_vx",
            Channel::DerivedVy => "derived_vy",
            Channel::DerivedVz => "derived_vz",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown channel `{0}`")]
pub struct UnknownChannel(pub String);

impl FromStr for Channel {
    type Err = UnknownChannel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let ch = match key.as_str() {
            "x_east" | "xeast" => Channel::XEast,
            "y_north" | "ynorth" => Channel::YNorth,
            "z_up" | "zup" => Channel::ZUp,
            "vx" => Channel::Vx,
            "vy" => Channel::Vy,
            "vz" => Channel::Vz,
            "heading" | "head" => Channel::Heading,
            "pitch" => Channel::Pitch,
            "roll" => Channel::Roll,
            "ground_speed" => Channel::GroundSpeed,
            "total_speed" => Channel::TotalSpeed,
            "derived_vx" => Channel::DerivedVx,
            "derived_vy" => Channel::DerivedVy,
            "derived_vz" => Channel::DerivedVz,
            _ => return Err(UnknownChannel(s.to_string())),
        };
        Ok(ch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    NonMonotonicTime,
    NonFiniteValue,
    ShortRecord,
    ColumnMismatch,
    /// Pitch outside `[-90, 90]` degrees.
    AngleOutOfRange,
}

/// One invariant violation. `row_index` is the 1-based data row (the header
/// is not counted); record-level issues use the row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub row_index: usize,
    pub detail: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {:?}: {}", self.row_index, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid trajectory ({} issue(s)); first: {}", .0.len(), .0.first().map(|i| i.to_string()).unwrap_or_default())]
    Invalid(Vec<ValidationIssue>),
    #[error("span of {span} s is shorter than the step {dt} s")]
    DegenerateSpan { span: f64, dt: f64 },
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("series needs at least 2 values, got {0}")]
    TooShort(usize),
}

/// Where a template was spliced into a generated sortie.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedTemplate {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
}

/// Checks every sample-level and record-level invariant. Angles are checked
/// after normalization, so only pitch can be out of range.
pub fn validate_samples(samples: &[Sample]) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if samples.len() < 2 {
        issues.push(ValidationIssue {
            kind: IssueKind::ShortRecord,
            row_index: samples.len(),
            detail: format!("{} sample(s); at least 2 required", samples.len()),
        });
    }
    let mut prev_t: Option<f64> = None;
    for (i, s) in samples.iter().enumerate() {
        let row = i + 1;
        let values = s.to_array();
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            issues.push(ValidationIssue {
                kind: IssueKind::NonFiniteValue,
                row_index: row,
                detail: format!("{} is {}", COLUMN_NAMES[col], values[col]),
            });
            continue;
        }
        if !(-90.0..=90.0).contains(&s.pitch) {
            issues.push(ValidationIssue {
                kind: IssueKind::AngleOutOfRange,
                row_index: row,
                detail: format!("pitch {} outside [-90, 90]", s.pitch),
            });
        }
        if let Some(p) = prev_t {
            if s.t <= p {
                issues.push(ValidationIssue {
                    kind: IssueKind::NonMonotonicTime,
                    row_index: row,
                    detail: format!("t = {} does not exceed previous {}", s.t, p),
                });
            }
        }
        prev_t = Some(s.t);
    }
    issues
}

/// A validated sortie recording: at least two samples, strictly increasing
/// time, finite values, normalized angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    sortie_id: String,
    samples: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    embedded: Vec<EmbeddedTemplate>,
}

impl Trajectory {
    /// Normalizes heading and roll, then checks all invariants.
    pub fn new(sortie_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self, TrajectoryError> {
        let samples: Vec<Sample> = samples.into_iter().map(Sample::normalized).collect();
        let issues = validate_samples(&samples);
        if !issues.is_empty() {
            return Err(TrajectoryError::Invalid(issues));
        }
        Ok(Trajectory {
            sortie_id: sortie_id.into(),
            samples,
            source: None,
            embedded: Vec::new(),
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn with_sortie_id(mut self, id: impl Into<String>) -> Self {
        self.sortie_id = id.into();
        self
    }

    pub(crate) fn with_embedded(mut self, embedded: Vec<EmbeddedTemplate>) -> Self {
        self.embedded = embedded;
        self
    }

    pub fn sortie_id(&self) -> &str {
        &self.sortie_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Templates spliced in by the generator, if any.
    pub fn embedded(&self) -> &[EmbeddedTemplate] {
        &self.embedded
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.t_last() - self.t_first()
    }

    /// Median spacing between consecutive samples.
    pub fn native_period(&self) -> f64 {
        let mut dts: Vec<f64> = self.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        dts.sort_by(f64::total_cmp);
        dts[dts.len() / 2]
    }

    /// Position-difference velocities, one per consecutive pair.
    pub fn derived_velocity(&self) -> Vec<[f64; 3]> {
        self.samples
            .windows(2)
            .map(|w| {
                let dt = w[1].t - w[0].t;
                [
                    (w[1].x_east - w[0].x_east) / dt,
                    (w[1].y_north - w[0].y_north) / dt,
                    (w[1].z_up - w[0].z_up) / dt,
                ]
            })
            .collect()
    }

    pub fn derived_speeds(&self) -> DerivedSpeeds {
        let (ground, total) = self
            .derived_velocity()
            .into_iter()
            .map(|[vx, vy, vz]| {
                let g2 = vx * vx + vy * vy;
                (g2.sqrt(), (g2 + vz * vz).sqrt())
            })
            .unzip();
        DerivedSpeeds { ground, total }
    }

    /// Raw channels have `len()` values; derived channels `len() - 1`.
    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        let raw = |f: fn(&Sample) -> f64| self.samples.iter().map(f).collect();
        match ch {
            Channel::XEast => raw(|s| s.x_east),
            Channel::YNorth => raw(|s| s.y_north),
            Channel::ZUp => raw(|s| s.z_up),
            Channel::Vx => raw(|s| s.vx),
            Channel::Vy => raw(|s| s.vy),
            Channel::Vz => raw(|s| s.vz),
            Channel::Heading => raw(|s| s.heading),
            Channel::Pitch => raw(|s| s.pitch),
            Channel::Roll => raw(|s| s.roll),
            Channel::GroundSpeed => self.derived_speeds().ground,
            Channel::TotalSpeed => self.derived_speeds().total,
            Channel::DerivedVx => self.derived_velocity().iter().map(|v| v[0]).collect(),
            Channel::DerivedVy => self.derived_velocity().iter().map(|v| v[1]).collect(),
            Channel::DerivedVz => self.derived_velocity().iter().map(|v| v[2]).collect(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Samples on the grid `t_first + k * dt` up to `t_last`. Linear and
    /// angular (shortest-arc) interpolation between bracketing samples.
    pub fn resample(&self, dt: f64) -> Result<Trajectory, TrajectoryError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TrajectoryError::InvalidStep(dt));
        }
        let t0 = self.t_first();
        let span = self.duration();
        // tolerate grid points that land a hair past t_last through rounding
        let slack = 1e-9 * dt.max(span.abs());
        if span + slack < dt {
            return Err(TrajectoryError::DegenerateSpan { span, dt });
        }
        let count = ((span + slack) / dt).floor() as usize + 1;
        let mut out = Vec::with_capacity(count);
        let mut j = 0;
        for k in 0..count {
            let t = (t0 + k as f64 * dt).min(self.t_last());
            while j + 2 < self.samples.len() && self.samples[j + 1].t < t {
                j += 1;
            }
            let (a, b) = (&self.samples[j], &self.samples[j + 1]);
            let f = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            out.push(interpolate(a, b, f, t));
        }
        Trajectory::new(self.sortie_id.clone(), out).map(|tr| Trajectory {
            source: self.source.clone(),
            embedded: self.embedded.clone(),
            ..tr
        })
    }

    /// Sub-trajectory of the samples with `t_start <= t <= t_end` (with a
    /// relative tolerance on both ends). `None` when fewer than 2 remain.
    pub fn window(&self, t_start: f64, t_end: f64) -> Option<Trajectory> {
        let eps = 1e-9 * (1.0 + t_end.abs().max(t_start.abs()));
        let lo = self.samples.partition_point(|s| s.t < t_start - eps);
        let hi = self.samples.partition_point(|s| s.t <= t_end + eps);
        if hi <= lo || hi - lo < 2 {
            return None;
        }
        Some(Trajectory {
            sortie_id: self.sortie_id.clone(),
            samples: self.samples[lo..hi].to_vec(),
            source: self.source.clone(),
            embedded: Vec::new(),
        })
    }
}

fn interpolate(a: &Sample, b: &Sample, f: f64, t: f64) -> Sample {
    let lerp = |x: f64, y: f64| x + (y - x) * f;
    let arc = |x: f64, y: f64| x + angle_delta(x, y) * f;
    Sample {
        t,
        x_east: lerp(a.x_east, b.x_east),
        y_north: lerp(a.y_north, b.y_north),
        z_up: lerp(a.z_up, b.z_up),
        vx: lerp(a.vx, b.vx),
        vy: lerp(a.vy, b.vy),
        vz: lerp(a.vz, b.vz),
        heading: normalize_heading(arc(a.heading, b.heading)),
        pitch: lerp(a.pitch, b.pitch),
        roll: normalize_roll(arc(a.roll, b.roll)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSpeeds {
    pub ground: Vec<f64>,
    pub total: Vec<f64>,
}

/// `out[i] = series[i + 1] - series[i]`.
pub fn first_difference(series: &[f64]) -> Result<Vec<f64>, TrajectoryError> {
    if series.len() < 2 {
        return Err(TrajectoryError::TooShort(series.len()));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// JSON exchange document: `{"sortie_id", "columns", "rows"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub sortie_id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("expected {expected} columns, document has {found}")]
    Columns { expected: usize, found: usize },
    #[error("row {row} has {found} cells")]
    Row { row: usize, found: usize },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

impl From<&Trajectory> for TrajectoryDocument {
    fn from(traj: &Trajectory) -> Self {
        TrajectoryDocument {
            sortie_id: traj.sortie_id.clone(),
            columns: COLUMN_NAMES.iter().map(|c| c.to_string()).collect(),
            rows: traj.samples.iter().map(|s| s.to_array().to_vec()).collect(),
        }
    }
}

impl TryFrom<TrajectoryDocument> for Trajectory {
    type Error = DocumentError;

    fn try_from(doc: TrajectoryDocument) -> Result<Self, Self::Error> {
        if doc.columns.len() != COLUMN_NAMES.len() {
            return Err(DocumentError::Columns {
                expected: COLUMN_NAMES.len(),
                found: doc.columns.len(),
            });
        }
        let samples = doc
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                <[f64; 10]>::try_from(r.as_slice())
                    .map(Sample::from_array)
                    .map_err(|_| DocumentError::Row {
                        row: i + 1,
                        found: r.len(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trajectory::new(doc.sortie_id, samples)?)
    }
}
