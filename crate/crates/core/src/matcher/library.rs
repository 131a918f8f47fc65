use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ManeuverTemplate, MatchError};
use crate::sim::{integrate_segments_at, SegmentKind, SegmentSpec};
use crate::trajectory::Channel;
use crate::tsv::{read_tsv_file, write_tsv};

/// Channels every built-in template is compared on.
pub const STANDARD_CHANNELS: [Channel; 4] = [Channel::Vz, Channel::Pitch, Channel::Roll, Channel::GroundSpeed];

const MANIFEST: &str = "templates.json";
const SPEED: f64 = 100.0;
const START_ALTITUDE: f64 = 1500.0;

/// One row of a template library manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub name: String,
    pub file: String,
    pub channels: Vec<Channel>,
}

fn padded(maneuver: SegmentKind, duration: f64) -> Vec<SegmentSpec> {
    let cruise = |d| SegmentSpec::new(SegmentKind::LevelCruise { speed: SPEED, heading: None }, d);
    vec![
        cruise(1.0),
        SegmentSpec::new(maneuver, duration).with_transition(5.0),
        cruise(5.0).with_transition(5.0),
    ]
}

/// Five noise-free exemplars flown at 100 m/s, each with a second of
/// cruise before and five seconds of roll-out after.
pub fn standard_templates(dt: f64) -> Result<Vec<ManeuverTemplate>, MatchError> {
    let specs = [
        ("climb", padded(SegmentKind::Climb { speed: SPEED, rate: 10.0 }, 25.0)),
        ("descent", padded(SegmentKind::Descent { speed: SPEED, rate: 10.0 }, 25.0)),
        ("right_turn", padded(SegmentKind::ConstantRateTurn { speed: SPEED, turn_rate: 3.0 }, 30.0)),
        (
            "s_turn",
            padded(
                SegmentKind::STurn {
                    speed: SPEED,
                    turn_rate: 6.0,
                    period: 30.0,
                },
                30.0,
            ),
        ),
        ("steep_left_turn", padded(SegmentKind::ConstantRateTurn { speed: SPEED, turn_rate: -8.0 }, 20.0)),
    ];
    specs
        .into_iter()
        .map(|(name, segs)| {
            let traj = integrate_segments_at(&segs, dt, START_ALTITUDE)
                .map_err(|e| MatchError::Library(format!("{name}: {e}")))?
                .with_sortie_id(name);
            ManeuverTemplate::new(name, traj, STANDARD_CHANNELS.to_vec())
        })
        .collect()
}

/// Writes `<name>.tsv` per template plus a `templates.json` manifest.
pub fn write_template_library(dir: &Path, templates: &[ManeuverTemplate]) -> Result<(), MatchError> {
    let io = |e: std::io::Error| MatchError::Library(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut entries = Vec::with_capacity(templates.len());
    for t in templates {
        if t.name.is_empty() || t.name.contains(['/', '\\']) || t.name.starts_with('.') {
            return Err(MatchError::InvalidTemplate {
                name: t.name.clone(),
                detail: "name is not usable as a file name".into(),
            });
        }
        let file = format!("{}.tsv", t.name);
        fs::write(dir.join(&file), write_tsv(&t.trajectory)).map_err(io)?;
        entries.push(LibraryEntry {
            name: t.name.clone(),
            file,
            channels: t.channels.clone(),
        });
    }
    let json = serde_json::to_vec_pretty(&entries).map_err(|e| MatchError::Library(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json).map_err(io)
}

/// Reads a library written by [`write_template_library`]. `path` is the
/// manifest itself or the directory holding `templates.json`; template
/// files are resolved next to the manifest.
pub fn load_template_library(path: &Path) -> Result<Vec<ManeuverTemplate>, MatchError> {
    let (dir, path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST))
    } else {
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
    };
    let bytes = fs::read(&path).map_err(|e| MatchError::Library(format!("{}: {e}", path.display())))?;
    let entries: Vec<LibraryEntry> =
        serde_json::from_slice(&bytes).map_err(|e| MatchError::Library(format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(MatchError::NoTemplates);
    }
    entries
        .into_iter()
        .map(|e| {
            let traj = read_tsv_file(&dir.join(&e.file)).map_err(|err| MatchError::Library(format!("{}: {err}", e.file)))?;
            ManeuverTemplate::new(e.name, traj, e.channels)
        })
        .collect()
}
