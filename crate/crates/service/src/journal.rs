//! Append-only JSON-lines label store.
//!
//! The file is locked for the lifetime of the [`Journal`], so a second
//! service pointed at the same path fails at startup. Every append is
//! written as a single line and synced before it becomes visible.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use thiserror::Error;

use crate::labels::{LabelKind, LabelRecord};

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal {path} is locked or not writable: {detail}")]
    Locked { path: PathBuf, detail: String },
    #[error("journal {path} line {line} is not a label record: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
    #[error("journal write failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelFilter {
    pub sortie_id: Option<String>,
    pub label_kind: Option<LabelKind>,
    pub labeler_id: Option<String>,
}

impl LabelFilter {
    pub fn matches(&self, r: &LabelRecord) -> bool {
        self.sortie_id.as_ref().is_none_or(|s| *s == r.sortie_id)
            && self.label_kind.is_none_or(|k| k == r.label_kind)
            && self.labeler_id.as_ref().is_none_or(|l| *l == r.labeler_id)
    }
}

struct Inner {
    file: File,
    records: Vec<LabelRecord>,
}

pub struct Journal {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal").field("path", &self.path).finish_non_exhaustive()
    }
}

impl Journal {
    /// Opens (creating if needed), locks and replays the journal. A torn
    /// final line left by a crash mid-write is cut off.
    pub fn open(path: &Path) -> Result<Self, JournalError> {
        let locked = |detail: String| JournalError::Locked {
            path: path.to_path_buf(),
            detail,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| locked(e.to_string()))?;
        file.try_lock().map_err(|e| locked(e.to_string()))?;

        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| locked(e.to_string()))?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;

        let mut records = Vec::new();
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: LabelRecord = serde_json::from_str(line).map_err(|e| JournalError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                detail: e.to_string(),
            })?;
            records.push(r);
        }
        Ok(Journal {
            path: path.to_path_buf(),
            inner: Mutex::new(Inner { file, records }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Stamps `record` with a fresh id and the current time, writes it
    /// durably, and returns the stored copy.
    pub fn append(&self, mut record: LabelRecord) -> Result<LabelRecord, JournalError> {
        let mut inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        record.record_id = uuid::Uuid::new_v4().to_string();
        // stamped under the lock so file order is created_at order
        record.created_at = Utc::now();
        let mut line = serde_json::to_string(&record).expect("label record serializes");
        line.push('\n');
        inner.file.write_all(line.as_bytes())?;
        inner.file.sync_data()?;
        inner.records.push(record.clone());
        Ok(record)
    }

    /// Matching records in `created_at` order, full history.
    pub fn export(&self, filter: &LabelFilter) -> Vec<LabelRecord> {
        let inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let mut out: Vec<LabelRecord> = inner.records.iter().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by_key(|r| r.created_at);
        out
    }

    pub fn count_for(&self, sortie_id: &str) -> usize {
        let inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        inner.records.iter().filter(|r| r.sortie_id == sortie_id).count()
    }
}
