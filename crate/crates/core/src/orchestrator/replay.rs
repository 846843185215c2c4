//! Rebuilding an engine from its log.

use std::sync::Arc;

use crate::similarity::SimilarityProvider;

use super::config::EventConfig;
use super::engine::IdeationEngine;
use super::log::{LogEntry, LogPayload};
use super::EngineError;

/// Engine rebuilt from a log. `repaired_tail` holds entries that the last
/// input should have produced but that are missing from the log, as happens
/// when a crash interrupts a batch write. The caller appends them.
#[derive(Debug)]
pub struct Replayed {
    pub engine: IdeationEngine,
    pub repaired_tail: Vec<LogEntry>,
}

/// Re-applies every input entry and checks that each derived entry in the
/// log is exactly what the engine produces again.
pub fn replay(
    log: &[LogEntry],
    provider: Arc<dyn SimilarityProvider>,
) -> Result<Replayed, EngineError> {
    let first = log.first().ok_or_else(|| EngineError::CorruptLog {
        seq: 0,
        reason: "log is empty".into(),
    })?;
    let mut engine = IdeationEngine::from_created(first, provider)?;
    let mut repaired_tail = Vec::new();
    let mut i = 1;
    while i < log.len() {
        let entry = &log[i];
        let corrupt = |reason: String| EngineError::CorruptLog {
            seq: entry.seq,
            reason,
        };
        if entry.seq != i as u64 {
            return Err(corrupt(format!("expected seq {i}")));
        }
        if !entry.payload.is_input() {
            return Err(corrupt("derived entry without a preceding input".into()));
        }
        let batch = engine
            .process(entry.timestamp, entry.actor.clone(), entry.payload.clone())
            .map_err(|e| corrupt(e.to_string()))?;
        for (j, derived) in batch.iter().enumerate() {
            match log.get(i + j) {
                Some(logged) if logged == derived => {}
                Some(logged) => {
                    return Err(EngineError::CorruptLog {
                        seq: logged.seq,
                        reason: "entry differs from the replayed one".into(),
                    })
                }
                None => repaired_tail.push(derived.clone()),
            }
        }
        i += batch.len();
    }
    Ok(Replayed {
        engine,
        repaired_tail,
    })
}

/// Like [`replay`], but also checks the log against the config it is meant
/// to belong to. An empty log yields a freshly created event. A config
/// without `starts_at` matches a log created at any time.
pub fn replay_with_config(
    log: &[LogEntry],
    config: &EventConfig,
    provider: Arc<dyn SimilarityProvider>,
) -> Result<Replayed, EngineError> {
    let Some(first) = log.first() else {
        let engine =
            IdeationEngine::create(config.clone(), config.starts_at.unwrap_or(0), provider)?;
        return Ok(Replayed {
            repaired_tail: engine.log().to_vec(),
            engine,
        });
    };
    if let LogPayload::EventCreated { config: logged } = &first.payload {
        let mut expected = config.clone();
        expected.starts_at = expected.starts_at.or(logged.starts_at);
        if &expected != logged {
            return Err(EngineError::CorruptLog {
                seq: first.seq,
                reason: "log was created from a different config".into(),
            });
        }
    }
    replay(log, provider)
}
