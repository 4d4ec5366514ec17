//! Append-only JSON-lines decision log.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ReviewError};
use crate::Decision;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub id: String,
    pub decision: Decision,
    pub reviewer: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

/// Complete entries of a log file, plus the byte length they occupy.
///
/// A final line without a newline that does not parse is a write cut short
/// by a crash and is dropped. Any other unparsable line is an error.
fn parse_log(path: &Path, bytes: &[u8]) -> Result<(Vec<LogEntry>, usize)> {
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, next, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], offset + i + 1, true),
            None => (rest, bytes.len(), false),
        };
        let text = std::str::from_utf8(line).map_err(|e| e.to_string());
        if text.as_ref().is_ok_and(|t| t.trim().is_empty()) {
            offset = next;
            continue;
        }
        match text.and_then(|t| serde_json::from_str::<LogEntry>(t).map_err(|e| e.to_string())) {
            Ok(entry) => entries.push(entry),
            Err(_) if !terminated => return Ok((entries, offset)),
            Err(message) => {
                return Err(ReviewError::Log {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                })
            }
        }
        offset = next;
    }
    Ok((entries, offset))
}

/// Reads a log without modifying it. A missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(parse_log(path, &bytes)?.0),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(ReviewError::io(path, e)),
    }
}

/// Single writer over the log file. Every append is flushed and synced
/// before it returns.
#[derive(Debug)]
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

impl DecisionLog {
    /// Opens or creates the log, returning the entries already in it. A torn
    /// final line is cut off so that later appends start on a fresh line.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogEntry>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| ReviewError::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| ReviewError::io(path, e))?;
        let (entries, good) = parse_log(path, &bytes)?;
        if good < bytes.len() {
            file.set_len(good as u64).map_err(|e| ReviewError::io(path, e))?;
        } else if bytes.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(|e| ReviewError::io(path, e))?;
        }
        Ok((
            DecisionLog {
                path: path.to_path_buf(),
                file,
            },
            entries,
        ))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(|e| ReviewError::BadRequest(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| ReviewError::io(&self.path, e))?;
        self.file.flush().map_err(|e| ReviewError::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| ReviewError::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
