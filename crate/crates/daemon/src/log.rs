//! The append-only command log.
//!
//! One JSON object per line. The first line is a header naming the format
//! version; every later line is a [`LogEntry`] with a gapless `seq`
//! starting at 1. Appends are flushed to the OS immediately and fsynced on
//! `DECISION`, so a decision the API has reported survives power loss.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use privocracy_core::ElectionId;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryKind {
    Request,
    ShareReceipt,
    PartialTally,
    Decision,
    Audit,
    /// What the executor did with an approved command.
    Execution,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub kind: EntryKind,
    pub election: ElectionId,
    pub payload: Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    privocracy_log: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("log storage failed earlier; no new elections are accepted")]
    Halted,
}

/// Where log lines go. `File` is the production sink; tests substitute
/// failing ones.
pub trait LogSink: Send {
    fn append(&mut self, line: &[u8]) -> io::Result<()>;
    fn sync(&mut self) -> io::Result<()>;
}

impl LogSink for File {
    fn append(&mut self, line: &[u8]) -> io::Result<()> {
        self.write_all(line)?;
        self.flush()
    }

    fn sync(&mut self) -> io::Result<()> {
        self.sync_data()
    }
}

/// Keeps lines in memory only.
#[derive(Default)]
pub struct MemorySink;

impl LogSink for MemorySink {
    fn append(&mut self, _: &[u8]) -> io::Result<()> {
        Ok(())
    }

    fn sync(&mut self) -> io::Result<()> {
        Ok(())
    }
}

pub struct CommandLog {
    sink: Box<dyn LogSink>,
    entries: Vec<LogEntry>,
    halted: bool,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl CommandLog {
    pub fn in_memory() -> Self {
        Self::with_sink(Box::new(MemorySink), Vec::new())
    }

    pub fn with_sink(sink: Box<dyn LogSink>, entries: Vec<LogEntry>) -> Self {
        CommandLog { sink, entries, halted: false }
    }

    /// Opens `path`, creating it with a header if absent. Existing entries
    /// are loaded and checked. A torn final line, the only damage a crash
    /// mid-append can cause, is cut off.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut entries = Vec::new();
        let mut good_len = 0u64;
        let mut header = false;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let read = reader.read_line(&mut line)?;
            if read == 0 {
                break;
            }
            lineno += 1;
            if !line.ends_with('\n') {
                break;
            }
            let corrupt = |reason: String| LogError::Corrupt { line: lineno, reason };
            if !header {
                let h: Header = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if h.privocracy_log != LOG_VERSION {
                    return Err(corrupt(format!("unsupported log version {}", h.privocracy_log)));
                }
                header = true;
            } else {
                let e: LogEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if e.seq != entries.len() as u64 + 1 {
                    return Err(corrupt(format!("expected seq {}, found {}", entries.len() + 1, e.seq)));
                }
                entries.push(e);
            }
            good_len += read as u64;
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            // Append mode writes at the new end.
            file.set_len(good_len)?;
        }
        if !header {
            let mut h = serde_json::to_vec(&Header { privocracy_log: LOG_VERSION }).expect("header serializes");
            h.push(b'\n');
            file.append(&h)?;
            file.sync_data()?;
        }
        Ok(Self::with_sink(Box::new(file), entries))
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    /// Appends an entry. After a storage failure the entry is still kept in
    /// memory so in-flight elections can finish, but the log reports itself
    /// halted and the error is returned.
    pub fn append(&mut self, kind: EntryKind, election: ElectionId, payload: Value) -> Result<&LogEntry, LogError> {
        let entry = LogEntry { seq: self.entries.len() as u64 + 1, timestamp: now_ms(), kind, election, payload };
        let mut line = serde_json::to_vec(&entry).expect("entries serialize");
        line.push(b'\n');
        let mut result = Ok(());
        if !self.halted {
            result = self.sink.append(&line);
            if result.is_ok() && kind == EntryKind::Decision {
                result = self.sink.sync();
            }
        }
        self.entries.push(entry);
        match result {
            Ok(()) if !self.halted => Ok(self.entries.last().expect("just pushed")),
            Ok(()) => Err(LogError::Halted),
            Err(e) => {
                self.halted = true;
                Err(e.into())
            }
        }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    /// Entries with `seq > after`, optionally for one election, in seq order.
    pub fn read(&self, after: u64, election: Option<ElectionId>) -> Vec<LogEntry> {
        let start = (after as usize).min(self.entries.len());
        self.entries[start..].iter().filter(|e| election.map_or(true, |id| e.election == id)).cloned().collect()
    }
}
