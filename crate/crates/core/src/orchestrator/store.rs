use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::iter::{Enumerate, Peekable};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{GameRecord, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// A line the reader skipped, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: usize,
    pub problem: String,
}

/// Append-only JSONL writer. One record per line; each append is a single
/// write followed by a flush.
pub struct RecordStore {
    path: PathBuf,
    file: File,
}

impl RecordStore {
    /// Opens `path` for appending, creating it if needed. A torn final line
    /// left by a crash is terminated so the next record starts on its own line.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        let len = file.metadata().map_err(io_err)?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(len - 1)).map_err(io_err)?;
            file.read_exact(&mut last).map_err(io_err)?;
            if last[0] != b'\n' {
                warn!("{}: terminating torn final line", path.display());
                file.write_all(b"\n").map_err(io_err)?;
            }
        }
        Ok(Self { path, file })
    }

    pub fn append(&mut self, record: &GameRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Streaming reader. Yields good records; skipped lines accumulate in
/// [`RecordReader::issues`].
pub struct RecordReader<R: Read> {
    lines: Peekable<Enumerate<io::Lines<BufReader<R>>>>,
    issues: Vec<LineIssue>,
}

impl<R: Read> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: BufReader::new(reader).lines().enumerate().peekable(),
            issues: Vec::new(),
        }
    }

    pub fn issues(&self) -> &[LineIssue] {
        &self.issues
    }

    fn issue(&mut self, line: usize, problem: String) {
        warn!("record line {line}: {problem}");
        self.issues.push(LineIssue { line, problem });
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = io::Result<GameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (i, line) = self.lines.next()?;
            let no = i + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                    self.issue(no, "not valid UTF-8".into());
                    continue;
                }
                Err(e) => return Some(Err(e)),
            };
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = match serde_json::from_str(&line) {
                Ok(v) => v,
                Err(e) => {
                    let problem = if self.lines.peek().is_none() {
                        format!("torn final line ignored ({e})")
                    } else {
                        format!("invalid JSON: {e}")
                    };
                    self.issue(no, problem);
                    continue;
                }
            };
            let version = value.get("schema_version").and_then(|v| v.as_u64());
            if version != Some(SCHEMA_VERSION as u64) {
                self.issue(
                    no,
                    format!("unsupported schema_version {version:?} (expected {SCHEMA_VERSION})"),
                );
                continue;
            }
            match serde_json::from_value(value) {
                Ok(record) => return Some(Ok(record)),
                Err(e) => self.issue(no, format!("not a game record: {e}")),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreRead {
    pub records: Vec<GameRecord>,
    pub issues: Vec<LineIssue>,
}

/// Reads every good record in `path`.
pub fn read_all(path: impl AsRef<Path>) -> Result<StoreRead, StoreError> {
    let path = path.as_ref();
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = RecordReader::new(file);
    let mut records = Vec::new();
    for r in reader.by_ref() {
        records.push(r.map_err(io_err)?);
    }
    Ok(StoreRead {
        records,
        issues: reader.issues,
    })
}
