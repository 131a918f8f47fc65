//! Analysis toolkit for flight-simulator sortie recordings.
//!
//! Covers the recorder file format, physical-irregularity detection,
//! good/bad sorting with threshold rules and from-scratch classifiers,
//! unsupervised maneuver matching, a synthetic sortie generator, and
//! vector rendering of ground tracks.

pub mod classify;
pub mod irregularity;
pub mod matcher;
pub mod render;
pub mod sim;
pub mod sorter;
pub mod summary;
pub mod trajectory;
pub mod tsv;

pub use irregularity::{label_sortie, DetectorConfig, FlagKind, FlaggedInterval, IrregularityReport};
pub use matcher::{match_sortie, rolling_match, ManeuverTemplate, MatchConfig, MatchResult};
pub use render::{export_json, import_json, render_altitude, render_topdown, PlotSpec};
pub use sorter::{Quality, RuleSet};
pub use summary::{compute_summary, SummaryFeatures};
pub use trajectory::{Channel, Sample, Trajectory, TrajectoryError};
pub use tsv::{parse_tsv, read_tsv_file, write_tsv, ParseError};
