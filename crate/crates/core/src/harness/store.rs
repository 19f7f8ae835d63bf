//! Append-only JSON-lines record file.
//!
//! The first line is a schema header `{"schema":"mbp-records","version":1}`;
//! every further line is one [`ExperimentRecord`]. A batch of records is
//! written with a single `write_all` followed by `sync_data`. On open, a
//! trailing partial line left by an interrupted write is truncated away;
//! scans skip it with a warning.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::penalty::StrategyKind;

use super::ExperimentRecord;

pub const STORE_SCHEMA: &str = "mbp-records";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

fn header_line() -> String {
    serde_json::to_string(&Header { schema: STORE_SCHEMA.into(), version: STORE_VERSION })
        .expect("header serializes")
}

fn check_header(line: &str) -> Result<()> {
    let h: Header = serde_json::from_str(line).map_err(|_| MbpError::Schema {
        found: format!("header {:?}", line.chars().take(60).collect::<String>()),
        expected: format!("{STORE_SCHEMA} v{STORE_VERSION}"),
    })?;
    if h.schema != STORE_SCHEMA || h.version != STORE_VERSION {
        return Err(MbpError::Schema {
            found: format!("{} v{}", h.schema, h.version),
            expected: format!("{STORE_SCHEMA} v{STORE_VERSION}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordFilter {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub solver: Option<String>,
    pub strategy: Option<StrategyKind>,
}

impl RecordFilter {
    pub fn matches(&self, r: &ExperimentRecord) -> bool {
        self.n.is_none_or(|n| r.graph.n == n)
            && self.p.is_none_or(|p| r.graph.p == Some(p))
            && self.solver.as_ref().is_none_or(|s| &r.solver_id == s)
            && self.strategy.is_none_or(|k| r.strategy() == Some(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub records: Vec<ExperimentRecord>,
    /// A trailing line without newline that did not parse was ignored.
    pub partial_tail: bool,
}

/// Writer handle. Only one should exist per file at a time.
#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    file: File,
}

impl RecordStore {
    /// Open for appending, creating the file with a header if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let text = fs::read_to_string(&path)?;
        if text.is_empty() {
            file.write_all(format!("{}\n", header_line()).as_bytes())?;
            file.sync_data()?;
        } else {
            check_header(text.lines().next().unwrap_or(""))?;
            if !text.ends_with('\n') {
                let keep = text.rfind('\n').map_or(0, |i| i + 1);
                log::warn!(
                    "{}: dropping {} bytes of an incomplete final record",
                    path.display(),
                    text.len() - keep
                );
                if keep == 0 {
                    // Only a partial header: start over.
                    file.set_len(0)?;
                    file.write_all(format!("{}\n", header_line()).as_bytes())?;
                } else {
                    file.set_len(keep as u64)?;
                }
                file.seek(SeekFrom::End(0))?;
                file.sync_data()?;
            }
        }
        Ok(RecordStore { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, records: &[ExperimentRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn scan(&self, filter: &RecordFilter) -> Result<ScanOutcome> {
        scan(&self.path, filter)
    }

    pub fn record_ids(&self) -> Result<HashSet<String>> {
        Ok(scan(&self.path, &RecordFilter::default())?.records.into_iter().map(|r| r.record_id).collect())
    }
}

/// Read every record matching `filter`. A missing file is an error.
pub fn scan(path: impl AsRef<Path>, filter: &RecordFilter) -> Result<ScanOutcome> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.split_inclusive('\n').enumerate();
    match lines.next() {
        None => return Ok(ScanOutcome { records: Vec::new(), partial_tail: false }),
        Some((_, first)) => {
            if !first.ends_with('\n') {
                log::warn!("{}: incomplete header ignored", path.display());
                return Ok(ScanOutcome { records: Vec::new(), partial_tail: true });
            }
            check_header(first.trim_end())?;
        }
    }
    let mut records = Vec::new();
    let mut partial_tail = false;
    for (i, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(line) {
            Ok(r) => {
                if filter.matches(&r) {
                    records.push(r);
                }
            }
            Err(_) if !raw.ends_with('\n') => {
                log::warn!("{}: ignoring incomplete final record at line {}", path.display(), i + 1);
                partial_tail = true;
            }
            Err(e) => return Err(MbpError::parse(i + 1, e.to_string())),
        }
    }
    Ok(ScanOutcome { records, partial_tail })
}
