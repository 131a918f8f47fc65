//! SVG ground-track and altitude-profile plots, and the JSON export used
//! by the label service.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{DocumentError, Trajectory, TrajectoryDocument};

pub const DEFAULT_DECIMATION: usize = 5000;
pub const MIN_DIMENSION: u32 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("width and height must be at least {MIN_DIMENSION} px, got {0}x{1}")]
    TooSmall(u32, u32),
    #[error("margin {0} leaves no drawing area")]
    Margin(f64),
    #[error("stroke width must be positive, got {0}")]
    Stroke(f64),
    #[error("decimation must keep at least 2 points, got {0}")]
    Decimation(usize),
}

/// Canvas size and styling in pixels. Construct through [`PlotSpec::new`]
/// or `Default`; deserialized specs are validated the same way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlotSpec")]
pub struct PlotSpec {
    width: u32,
    height: u32,
    margin: f64,
    stroke_width: f64,
    decimation: usize,
}

#[derive(Deserialize)]
struct RawPlotSpec {
    width: u32,
    height: u32,
    margin: f64,
    stroke_width: f64,
    #[serde(default = "default_decimation")]
    decimation: usize,
}

fn default_decimation() -> usize {
    DEFAULT_DECIMATION
}

impl TryFrom<RawPlotSpec> for PlotSpec {
    type Error = RenderError;

    fn try_from(r: RawPlotSpec) -> Result<Self, RenderError> {
        PlotSpec::new(r.width, r.height, r.margin, r.stroke_width, r.decimation)
    }
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 800,
            height: 600,
            margin: 20.0,
            stroke_width: 1.5,
            decimation: DEFAULT_DECIMATION,
        }
    }
}

impl PlotSpec {
    pub fn new(width: u32, height: u32, margin: f64, stroke_width: f64, decimation: usize) -> Result<Self, RenderError> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(RenderError::TooSmall(width, height));
        }
        if !(margin >= 0.0 && 2.0 * margin < f64::from(width.min(height))) {
            return Err(RenderError::Margin(margin));
        }
        if !(stroke_width > 0.0 && stroke_width.is_finite()) {
            return Err(RenderError::Stroke(stroke_width));
        }
        if decimation < 2 {
            return Err(RenderError::Decimation(decimation));
        }
        Ok(PlotSpec {
            width,
            height,
            margin,
            stroke_width,
            decimation,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn stroke_width(&self) -> f64 {
        self.stroke_width
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    fn inner(&self) -> (f64, f64) {
        (f64::from(self.width) - 2.0 * self.margin, f64::from(self.height) - 2.0 * self.margin)
    }
}

/// Indices of at most `max` evenly spaced samples out of `n`, always
/// including the first and last.
pub fn decimate_indices(n: usize, max: usize) -> Vec<usize> {
    let max = max.max(2);
    if n <= max {
        return (0..n).collect();
    }
    let step = (n - 1) as f64 / (max - 1) as f64;
    (0..max).map(|k| ((k as f64 * step).round() as usize).min(n - 1)).collect()
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn document(spec: &PlotSpec, title: &str, points: &[(f64, f64)]) -> String {
    let (lo_x, hi_x) = (spec.margin, f64::from(spec.width) - spec.margin);
    let (lo_y, hi_y) = (spec.margin, f64::from(spec.height) - spec.margin);
    let mut pts = String::with_capacity(points.len() * 18);
    for (i, &(x, y)) in points.iter().enumerate() {
        if i > 0 {
            pts.push(' ');
        }
        // clamp guards the last ulp; printed values stay inside the margins
        let _ = write!(pts, "{:.3},{:.3}", x.clamp(lo_x, hi_x), y.clamp(lo_y, hi_y));
    }
    let (w, h) = (spec.width, spec.height);
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>{}</title>\n\
         <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"{}\" stroke-linejoin=\"round\" points=\"{pts}\"/>\n\
         </svg>\n",
        escape(title),
        spec.stroke_width,
    )
}

/// Ground track, north up, one uniform scale on both axes so the shape is
/// not distorted. The track is centered along its shorter axis.
pub fn render_topdown(traj: &Trajectory, spec: &PlotSpec) -> String {
    let s = traj.samples();
    let idx = decimate_indices(s.len(), spec.decimation);
    let (x0, x1) = bounds(s.iter().map(|p| p.x_east));
    let (y0, y1) = bounds(s.iter().map(|p| p.y_north));
    let (iw, ih) = spec.inner();
    let (rx, ry) = (x1 - x0, y1 - y0);
    let scale = match (rx > 0.0, ry > 0.0) {
        (true, true) => (iw / rx).min(ih / ry),
        (true, false) => iw / rx,
        (false, true) => ih / ry,
        (false, false) => 0.0,
    };
    let ox = spec.margin + 0.5 * (iw - rx * scale);
    let oy = spec.margin + 0.5 * (ih - ry * scale);
    let points: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let p = &s[i];
            (ox + (p.x_east - x0) * scale, oy + (y1 - p.y_north) * scale)
        })
        .collect();
    document(spec, &format!("{} ground track", traj.sortie_id()), &points)
}

/// Altitude against time, each axis stretched to the drawing area.
pub fn render_altitude(traj: &Trajectory, spec: &PlotSpec) -> String {
    let s = traj.samples();
    let idx = decimate_indices(s.len(), spec.decimation);
    let (t0, t1) = (traj.t_first(), traj.t_last());
    let (z0, z1) = bounds(s.iter().map(|p| p.z_up));
    let (iw, ih) = spec.inner();
    let points: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let p = &s[i];
            let x = spec.margin + (p.t - t0) / (t1 - t0) * iw;
            let y = if z1 > z0 {
                spec.margin + (z1 - p.z_up) / (z1 - z0) * ih
            } else {
                spec.margin + 0.5 * ih
            };
            (x, y)
        })
        .collect();
    document(spec, &format!("{} altitude", traj.sortie_id()), &points)
}

/// `{"sortie_id", "columns", "rows"}` with the ten recorder columns.
pub fn export_json(traj: &Trajectory) -> String {
    serde_json::to_string(&TrajectoryDocument::from(traj)).expect("plain numeric document serializes")
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

/// Inverse of [`export_json`].
pub fn import_json(text: &str) -> Result<Trajectory, ImportError> {
    let doc: TrajectoryDocument = serde_json::from_str(text)?;
    Ok(Trajectory::try_from(doc)?)
}

/// `(x, y)` vertices of the first polyline in a document produced here.
pub fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
    let Some(start) = svg.find("points=\"") else {
        return Vec::new();
    };
    let rest = &svg[start + 8..];
    let body = &rest[..rest.find('"').unwrap_or(rest.len())];
    body.split_whitespace()
        .filter_map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}
