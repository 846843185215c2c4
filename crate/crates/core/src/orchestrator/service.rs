//! Single-writer access to events from many threads.
//!
//! Each event lives on its own worker thread. Callers send closures over a
//! channel and wait for the reply, so log entries of one event are written
//! in exactly the order the worker ran them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, RwLock};
use std::thread;

use crate::conversation::UserEvent;
use crate::domain::{CollaboratorId, Timestamp};

use super::config::EventConfig;
use super::engine::{Delivery, HandleOutcome, IdeationEngine, ScoreReport};
use super::log::{read_log_truncating, LogEntry, LogFile, LogPayload, PhaseTransition};
use super::replay::replay;
use super::{provider_for, EngineError};

type Subscriber = Box<dyn Fn(&Delivery) + Send>;
type Job = Box<dyn FnOnce(&mut Worker) + Send>;

struct Worker {
    engine: IdeationEngine,
    file: Option<LogFile>,
    persisted: usize,
    subscribers: Vec<Subscriber>,
}

impl Worker {
    /// Writes entries appended since the last flush and notifies subscribers
    /// of new bot messages.
    fn flush(&mut self) -> Result<(), EngineError> {
        let fresh = &self.engine.log()[self.persisted..];
        if fresh.is_empty() {
            return Ok(());
        }
        if let Some(file) = &mut self.file {
            file.append(fresh)?;
        }
        for entry in fresh {
            if let LogPayload::BotMessage { to, message } = &entry.payload {
                let delivery = Delivery {
                    seq: entry.seq,
                    to: to.clone(),
                    message: message.clone(),
                };
                for sub in &self.subscribers {
                    sub(&delivery);
                }
            }
        }
        self.persisted = self.engine.log().len();
        Ok(())
    }
}

/// Cloneable handle to one event's worker.
#[derive(Clone)]
pub struct EventHandle {
    event_id: String,
    tx: mpsc::Sender<Job>,
}

impl std::fmt::Debug for EventHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventHandle")
            .field("event_id", &self.event_id)
            .finish()
    }
}

impl EventHandle {
    /// Spawns the worker. Entries already in the engine's log count as
    /// persisted unless `file` is given and `persisted` says otherwise.
    pub fn spawn(engine: IdeationEngine, file: Option<LogFile>, persisted: usize) -> Self {
        let event_id = engine.config().event_id.clone();
        let (tx, rx) = mpsc::channel::<Job>();
        let mut worker = Worker {
            engine,
            file,
            persisted,
            subscribers: Vec::new(),
        };
        thread::Builder::new()
            .name(format!("event-{event_id}"))
            .spawn(move || {
                if let Err(err) = worker.flush() {
                    tracing::error!(error = %err, "could not persist log");
                }
                for job in rx {
                    job(&mut worker);
                }
            })
            .expect("spawn event worker");
        Self { event_id, tx }
    }

    pub fn event_id(&self) -> &str {
        &self.event_id
    }

    fn run<R, F>(&self, f: F) -> Result<R, EngineError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Worker) -> Result<R, EngineError> + Send + 'static,
    {
        let (reply_tx, reply_rx) = mpsc::channel();
        let job: Job = Box::new(move |worker| {
            let result = f(worker);
            let flushed = worker.flush();
            let _ = reply_tx.send(flushed.and(result));
        });
        self.tx.send(job).map_err(|_| EngineError::Stopped)?;
        reply_rx.recv().map_err(|_| EngineError::Stopped)?
    }

    /// Runs a read-only query against the engine.
    pub fn with<R, F>(&self, f: F) -> Result<R, EngineError>
    where
        R: Send + 'static,
        F: FnOnce(&IdeationEngine) -> R + Send + 'static,
    {
        self.run(move |w| Ok(f(&w.engine)))
    }

    pub fn handle_incoming(
        &self,
        user: CollaboratorId,
        event: UserEvent,
        now: Timestamp,
    ) -> Result<HandleOutcome, EngineError> {
        self.run(move |w| w.engine.handle_incoming(&user, event, now))
    }

    pub fn enroll(
        &self,
        user: CollaboratorId,
        alias: Option<String>,
        now: Timestamp,
    ) -> Result<Vec<Delivery>, EngineError> {
        self.run(move |w| w.engine.enroll(user, alias, now))
    }

    pub fn advance_phase(
        &self,
        now: Timestamp,
    ) -> Result<(PhaseTransition, Vec<Delivery>), EngineError> {
        self.run(move |w| w.engine.advance_phase(now))
    }

    pub fn tick(&self, now: Timestamp) -> Result<Vec<Delivery>, EngineError> {
        self.run(move |w| w.engine.tick(now))
    }

    pub fn report(&self) -> Result<ScoreReport, EngineError> {
        self.with(|e| e.report())
    }

    pub fn log(&self) -> Result<Vec<LogEntry>, EngineError> {
        self.with(|e| e.log().to_vec())
    }

    pub fn deliveries_since(
        &self,
        user: CollaboratorId,
        after: Option<u64>,
    ) -> Result<Vec<Delivery>, EngineError> {
        self.with(move |e| e.deliveries_since(&user, after))
    }

    pub fn is_enrolled(&self, user: CollaboratorId) -> Result<bool, EngineError> {
        self.with(move |e| e.core().roster.contains_key(&user))
    }

    /// Calls `f` on the worker thread for every bot message logged from now on.
    pub fn subscribe(&self, f: impl Fn(&Delivery) + Send + 'static) -> Result<(), EngineError> {
        self.run(move |w| {
            w.subscribers.push(Box::new(f));
            Ok(())
        })
    }
}

/// All events served by one process, optionally persisted as
/// `<dir>/<event_id>.jsonl`.
#[derive(Debug, Default)]
pub struct Registry {
    events: RwLock<BTreeMap<String, EventHandle>>,
    log_dir: Option<PathBuf>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Registry persisting to `dir`, with every log already there replayed.
    pub fn open(dir: &Path) -> Result<Arc<Self>, EngineError> {
        std::fs::create_dir_all(dir).map_err(|source| super::LogIoError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let registry = Self {
            events: RwLock::default(),
            log_dir: Some(dir.to_owned()),
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|source| super::LogIoError::Io {
                path: dir.to_owned(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let handle = recover(&path)?;
            registry
                .events
                .write()
                .expect("registry lock")
                .insert(handle.event_id().to_owned(), handle);
        }
        Ok(Arc::new(registry))
    }

    fn log_path(&self, event_id: &str) -> Option<PathBuf> {
        self.log_dir
            .as_ref()
            .map(|d| d.join(format!("{event_id}.jsonl")))
    }

    pub fn create(&self, config: EventConfig, now: Timestamp) -> Result<EventHandle, EngineError> {
        config.validate()?;
        let mut events = self.events.write().expect("registry lock");
        if events.contains_key(&config.event_id) {
            return Err(EngineError::DuplicateEvent(config.event_id));
        }
        let provider = provider_for(&config)?;
        let engine = IdeationEngine::create(config, now, provider)?;
        let file = match self.log_path(&engine.config().event_id) {
            Some(path) => Some(LogFile::open(&path)?),
            None => None,
        };
        let handle = EventHandle::spawn(engine, file, 0);
        // the worker writes the creation batch before any other job
        handle.with(|_| ())?;
        events.insert(handle.event_id().to_owned(), handle.clone());
        Ok(handle)
    }

    pub fn get(&self, event_id: &str) -> Result<EventHandle, EngineError> {
        self.events
            .read()
            .expect("registry lock")
            .get(event_id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownEvent(event_id.to_owned()))
    }

    pub fn handles(&self) -> Vec<EventHandle> {
        self.events
            .read()
            .expect("registry lock")
            .values()
            .cloned()
            .collect()
    }
}

/// Replays a persisted log, appends any missing tail and resumes the event.
pub fn recover(path: &Path) -> Result<EventHandle, EngineError> {
    let entries = read_log_truncating(path)?;
    let first_config = match entries.first().map(|e| &e.payload) {
        Some(LogPayload::EventCreated { config }) => config.clone(),
        _ => {
            return Err(EngineError::CorruptLog {
                seq: 0,
                reason: format!("{} does not start with EventCreated", path.display()),
            })
        }
    };
    let replayed = replay(&entries, provider_for(&first_config)?)?;
    let file = LogFile::open(path)?;
    Ok(EventHandle::spawn(
        replayed.engine,
        Some(file),
        entries.len(),
    ))
}
