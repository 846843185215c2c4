//! Append-only event log. One JSON record per line, in sequence order.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::UserEvent;
use crate::domain::{Collaborator, CollaboratorId, PhaseKind, Timestamp};
use crate::messages::BotMessage;
use crate::policies::PolicyDelta;

use super::config::EventConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Actor {
    System,
    User(CollaboratorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionCause {
    Clock,
    Admin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub from: PhaseKind,
    pub to: PhaseKind,
    pub cause: TransitionCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LogPayload {
    EventCreated {
        config: EventConfig,
    },
    Enrolled {
        collaborator: Collaborator,
    },
    UserEvent {
        event: UserEvent,
    },
    PhaseTransition(PhaseTransition),
    BotMessage {
        to: CollaboratorId,
        message: BotMessage,
    },
    PolicyStateDelta(PolicyDelta),
}

impl LogPayload {
    /// Inputs drive the engine; everything else is derived from them and
    /// is re-derived on replay.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            LogPayload::EventCreated { .. }
                | LogPayload::Enrolled { .. }
                | LogPayload::UserEvent { .. }
                | LogPayload::PhaseTransition(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: Actor,
    pub payload: LogPayload,
}

#[derive(Debug, Error)]
pub enum LogIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn encode_entry(entry: &LogEntry) -> String {
    serde_json::to_string(entry).expect("log entries always serialize")
}

pub fn write_jsonl(mut out: impl Write, entries: &[LogEntry]) -> std::io::Result<()> {
    for entry in entries {
        writeln!(out, "{}", encode_entry(entry))?;
    }
    out.flush()
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, LogIoError> {
    let io = |source| LogIoError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| LogIoError::Parse {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads a log that may end in a partially written line. Such a line is
/// cut from the file; a malformed line anywhere else is still an error.
pub fn read_log_truncating(path: &Path) -> Result<Vec<LogEntry>, LogIoError> {
    let io = |source| LogIoError::Io {
        path: path.to_owned(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let is_last = lines.peek().is_none();
        if !line.trim().is_empty() {
            match serde_json::from_str(line.trim_end()) {
                Ok(entry) => entries.push(entry),
                Err(_) if is_last && !line.ends_with('\n') => {
                    tracing::warn!(path = %path.display(), line = i + 1, "dropping partially written log line");
                    let file = OpenOptions::new().write(true).open(path).map_err(io)?;
                    file.set_len(offset as u64).map_err(io)?;
                    file.sync_data().map_err(io)?;
                    break;
                }
                Err(source) => {
                    return Err(LogIoError::Parse {
                        path: path.to_owned(),
                        line: i + 1,
                        source,
                    })
                }
            }
        }
        offset += line.len();
    }
    Ok(entries)
}

/// Log file opened for appending. Every batch is flushed and synced before
/// `append` returns.
pub struct LogFile {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl LogFile {
    pub fn open(path: &Path) -> Result<Self, LogIoError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LogIoError::Io {
                path: path.to_owned(),
                source,
            })?;
        Ok(Self {
            path: path.to_owned(),
            writer: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entries: &[LogEntry]) -> Result<(), LogIoError> {
        let io = |source| LogIoError::Io {
            path: self.path.clone(),
            source,
        };
        for entry in entries {
            writeln!(self.writer, "{}", encode_entry(entry)).map_err(io)?;
        }
        self.writer.flush().map_err(io)?;
        self.writer.get_ref().sync_data().map_err(io)
    }
}
