use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Quality,
    Maneuver,
}

impl std::str::FromStr for LabelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quality" => Ok(LabelKind::Quality),
            "maneuver" => Ok(LabelKind::Maneuver),
            other => Err(format!("unknown label_kind `{other}`; expected quality or maneuver")),
        }
    }
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub record_id: String,
    pub sortie_id: String,
    pub label_kind: LabelKind,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub labeler_id: String,
    pub created_at: DateTime<Utc>,
}

/// POST body: a record minus the fields the service assigns. The labeler
/// may also come from the `x-labeler-id` header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewLabel {
    pub label_kind: LabelKind,
    pub value: String,
    #[serde(default)]
    pub t_start: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub labeler_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelProblem {
    Malformed(String),
    Interval(String),
}

/// Checks `label` against a sortie spanning `[t_first, t_last]` and returns
/// the labeler id to store.
pub fn check_label(label: &NewLabel, header_labeler: Option<&str>, span: (f64, f64)) -> Result<String, LabelProblem> {
    let labeler = match (header_labeler, label.labeler_id.as_deref()) {
        (Some(h), Some(b)) if h != b => {
            return Err(LabelProblem::Malformed(format!("labeler header `{h}` disagrees with body `{b}`")))
        }
        (Some(h), _) => h,
        (None, Some(b)) => b,
        (None, None) => return Err(LabelProblem::Malformed("labeler_id is required".into())),
    };
    if labeler.trim().is_empty() {
        return Err(LabelProblem::Malformed("labeler_id is empty".into()));
    }
    match label.label_kind {
        LabelKind::Quality => {
            if label.value != "good" && label.value != "bad" {
                return Err(LabelProblem::Malformed(format!("quality must be good or bad, got `{}`", label.value)));
            }
            if label.t_start.is_some() || label.t_end.is_some() {
                return Err(LabelProblem::Interval("quality labels take no interval".into()));
            }
        }
        LabelKind::Maneuver => {
            if label.value.trim().is_empty() {
                return Err(LabelProblem::Malformed("maneuver name is empty".into()));
            }
            let (Some(a), Some(b)) = (label.t_start, label.t_end) else {
                return Err(LabelProblem::Interval("maneuver labels need t_start and t_end".into()));
            };
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(LabelProblem::Interval(format!("need t_start < t_end, got [{a}, {b}]")));
            }
            if a < span.0 || b > span.1 {
                return Err(LabelProblem::Interval(format!(
                    "[{a}, {b}] is outside the sortie's [{}, {}]",
                    span.0, span.1
                )));
            }
        }
    }
    Ok(labeler.to_string())
}
