//! Per-session NDJSON log. Each wire line is stored verbatim in the `line`
//! field of an envelope that records direction, connection and server time.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::message::Role;
use crate::engine::{ConnId, EngineConfig, Poi};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dir", rename_all = "lowercase")]
pub enum LogEntry {
    /// Session header: everything needed to rebuild the engine.
    Start {
        at: i64,
        session_id: String,
        epoch_ts: i64,
        engine: EngineConfig,
        #[serde(default)]
        pois: Vec<Poi>,
    },
    /// Inbound line forwarded to the engine.
    In {
        at: i64,
        conn: ConnId,
        role: Role,
        line: String,
    },
    /// Inbound line handled by the session layer only.
    Ctl {
        at: i64,
        conn: ConnId,
        line: String,
        note: String,
    },
    /// Engine clock tick.
    Tick { at: i64 },
    /// Engine emission. `n` counts engine events consumed before it.
    Out {
        at: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<ConnId>,
        n: u64,
        line: String,
    },
    /// Session-layer reply (WELCOME, protocol errors).
    Session { at: i64, conn: ConnId, line: String },
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log entries always serialize")
    }
}

pub trait LogSink: Send {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()>;
}

/// In-memory log, one encoded entry per element.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    pub lines: Vec<String>,
}

impl LogSink for MemoryLog {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()> {
        self.lines.push(entry.to_line());
        Ok(())
    }
}

impl<T: LogSink + ?Sized> LogSink for Box<T> {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()> {
        (**self).append(entry)
    }
}

impl<T: LogSink> LogSink for std::sync::Arc<std::sync::Mutex<T>> {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()> {
        self.lock()
            .map_err(|_| io::Error::other("log lock poisoned"))?
            .append(entry)
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullLog;

impl LogSink for NullLog {
    fn append(&mut self, _entry: &LogEntry) -> io::Result<()> {
        Ok(())
    }
}

/// Append-only file log. Each entry is written with a single `write_all`
/// of the full line, so an interrupted process leaves only complete lines.
#[derive(Debug)]
pub struct FileLog {
    file: File,
    path: PathBuf,
}

impl FileLog {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FileLog { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl LogSink for FileLog {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()> {
        let mut line = entry.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())
    }
}

/// Reads raw log lines (blank lines dropped, numbering preserved, 1-based).
pub fn read_log_lines(path: impl AsRef<Path>) -> io::Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}
