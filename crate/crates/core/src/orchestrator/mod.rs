//! Event orchestration: configuration, the append-only log, the engine that
//! derives state from it, replay, and a single-writer handle for servers.

pub mod config;
pub mod engine;
pub mod log;
pub mod replay;
pub mod service;

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::conversation::ConversationError;
use crate::domain::CollaboratorId;
use crate::policies::PolicyError;
use crate::similarity::{ReferenceProvider, RemoteProvider, SimilarityProvider};

pub use config::{EventConfig, RemoteSimilarity, RosterEntry, DAY_MS};
pub use engine::{
    Delivery, EngineState, EventCore, FinalResults, HandleOutcome, IdeationEngine, ScoreReport,
};
pub use log::{Actor, LogEntry, LogFile, LogIoError, LogPayload, PhaseTransition, TransitionCause};
pub use replay::{replay, replay_with_config, Replayed};
pub use service::{EventHandle, Registry};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown collaborator {0}")]
    UnknownUser(CollaboratorId),
    #[error("{0} is already enrolled")]
    AlreadyEnrolled(CollaboratorId),
    #[error("the event has closed")]
    PhaseClosed,
    #[error("the event is already in its final phase")]
    AlreadyFinal,
    #[error("invalid phase transition {0:?}")]
    InvalidTransition(PhaseTransition),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Conversation(#[from] ConversationError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("log entry {seq} does not match the engine: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error(transparent)]
    Io(#[from] LogIoError),
    #[error("event {0} not found")]
    UnknownEvent(String),
    #[error("event {0} already exists")]
    DuplicateEvent(String),
    #[error("event worker stopped")]
    Stopped,
}

/// Similarity provider named by the config: the remote service when one is
/// configured, the built-in reference scorer otherwise.
pub fn provider_for(config: &EventConfig) -> Result<Arc<dyn SimilarityProvider>, EngineError> {
    Ok(match &config.similarity {
        Some(remote) => Arc::new(
            RemoteProvider::new(&remote.url, Duration::from_millis(remote.timeout_ms))
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?,
        ),
        None => Arc::new(ReferenceProvider),
    })
}
