//! Tab-separated recorder files.
//!
//! The header names the ten recorded columns (units in parentheses are
//! ignored). Rows may carry an extra leading row-index column, which is
//! detected by cell count and dropped.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::trajectory::{
    validate_samples, IssueKind, Sample, Trajectory, TrajectoryError, ValidationIssue, COLUMN_NAMES,
};

const COLUMN_KEYS: [&[&str]; 10] = [
    &["time", "t"],
    &["xeast", "x_east"],
    &["ynorth", "y_north"],
    &["zup", "z_up"],
    &["vx"],
    &["vy"],
    &["vz"],
    &["head", "heading"],
    &["pitch"],
    &["roll"],
];

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("file has no data rows")]
    EmptyFile,
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error(transparent)]
    Invalid(#[from] TrajectoryError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// A table split into cells but not yet checked against trajectory
/// invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<RawRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    /// 1-based data row number (header excluded).
    pub index: usize,
    pub cells: Vec<String>,
}

impl RawRow {
    /// The ten value cells, with any leading index column removed.
    fn value_cells(&self) -> Option<&[String]> {
        match self.cells.len() {
            10 => Some(&self.cells),
            11 => Some(&self.cells[1..]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop rows containing blank, unparseable or non-finite cells instead
    /// of failing.
    pub drop_invalid_rows: bool,
}

fn header_key(cell: &str) -> String {
    let name = match cell.find('(') {
        Some(i) => &cell[..i],
        None => cell,
    };
    name.trim().to_ascii_lowercase()
}

fn check_header(line: &str) -> Result<(), ParseError> {
    let mut cells: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cells.len() == 11 {
        // unlabeled (or labeled) index column
        cells.remove(0);
    }
    if cells.len() != 10 {
        return Err(ParseError::MalformedHeader(format!(
            "expected 10 column names, found {}",
            cells.len()
        )));
    }
    for (i, cell) in cells.iter().enumerate() {
        let key = header_key(cell);
        if !COLUMN_KEYS[i].contains(&key.as_str()) {
            return Err(ParseError::MalformedHeader(format!(
                "column {} is `{cell}`, expected `{}`",
                i + 1,
                COLUMN_NAMES[i]
            )));
        }
    }
    Ok(())
}

/// Checks the header and splits data rows into cells. Blank lines are
/// skipped.
pub fn read_table(bytes: &[u8]) -> Result<RawTable, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError::NotUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(ParseError::EmptyFile)?;
    check_header(header)?;
    let rows: Vec<RawRow> = lines
        .enumerate()
        .map(|(i, l)| RawRow {
            index: i + 1,
            cells: l.split('\t').map(|c| c.trim().to_string()).collect(),
        })
        .collect();
    if rows.is_empty() {
        return Err(ParseError::EmptyFile);
    }
    Ok(RawTable { rows })
}

fn parse_row(row: &RawRow) -> Result<Sample, ValidationIssue> {
    let cells = row.value_cells().ok_or_else(|| ValidationIssue {
        kind: IssueKind::ColumnMismatch,
        row_index: row.index,
        detail: format!("{} cells; expected 10 (or 11 with index)", row.cells.len()),
    })?;
    let mut values = [0.0; 10];
    for (col, cell) in cells.iter().enumerate() {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values[col] = v,
            _ => {
                return Err(ValidationIssue {
                    kind: IssueKind::NonFiniteValue,
                    row_index: row.index,
                    detail: format!("{} = `{cell}`", COLUMN_NAMES[col]),
                })
            }
        }
    }
    Ok(Sample::from_array(values))
}

/// Lists every invariant violation in a raw table; empty exactly when
/// [`parse_tsv`] would accept it.
pub fn validate(table: &RawTable) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut parsed: Vec<(usize, Sample)> = Vec::new();
    for row in &table.rows {
        match parse_row(row) {
            Ok(s) => parsed.push((row.index, s)),
            Err(issue) => issues.push(issue),
        }
    }
    let samples: Vec<Sample> = parsed.iter().map(|(_, s)| *s).collect();
    for mut issue in validate_samples(&samples) {
        // map positions within the parsed subset back to file rows
        if issue.kind != IssueKind::ShortRecord {
            issue.row_index = parsed[issue.row_index - 1].0;
        } else {
            issue.row_index = table.rows.len();
        }
        issues.push(issue);
    }
    issues.sort_by_key(|i| i.row_index);
    issues
}

pub fn parse_tsv(bytes: &[u8], sortie_id: &str) -> Result<Trajectory, ParseError> {
    parse_tsv_with(bytes, sortie_id, ParseOptions::default())
}

pub fn parse_tsv_with(bytes: &[u8], sortie_id: &str, opts: ParseOptions) -> Result<Trajectory, ParseError> {
    let table = read_table(bytes)?;
    let mut samples = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        match parse_row(row) {
            Ok(s) => samples.push(s),
            Err(issue) if opts.drop_invalid_rows && issue.kind == IssueKind::NonFiniteValue => {}
            Err(issue) => {
                return Err(ParseError::MalformedRow {
                    row: issue.row_index,
                    detail: issue.detail,
                })
            }
        }
    }
    Ok(Trajectory::new(sortie_id, samples)?)
}

/// Reads a file; the sortie id is the file stem.
pub fn read_tsv_file(path: &Path) -> Result<Trajectory, ParseError> {
    let bytes = fs::read(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_tsv(&bytes, &id)?.with_source(path))
}

/// Header row then one row per sample, every value in scientific notation
/// with seven significant digits.
pub fn write_tsv(traj: &Trajectory) -> Vec<u8> {
    use std::fmt::Write;
    let mut out = String::with_capacity(traj.len() * 150 + 100);
    out.push_str(&COLUMN_NAMES.join("\t"));
    out.push('\n');
    for s in traj.samples() {
        for (i, v) in s.to_array().iter().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{v:.6E}");
        }
        out.push('\n');
    }
    out.into_bytes()
}
