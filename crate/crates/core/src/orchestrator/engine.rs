//! State of one ideation event, mutated only by appending to its log.

use std::collections::BTreeMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::conversation::{
    self, most_dissimilar_opinions, ConversationError, ConversationState, Rejection, SessionEnv,
    SubmittedIdea, UserEvent,
};
use crate::domain::{
    Collaborator, CollaboratorId, Idea, IdeaId, Likert7, OpinionRecord, PhaseKind, Timestamp,
};
use crate::messages::{BotMessage, OthersOpinions, SelectedIdea, Templates};
use crate::policies::{
    GenerationOutcome, GenerationPolicy, GenerationPrompt, InspirationSource, PolicyDelta,
    SelectionPolicy,
};
use crate::scoring::{exemplary_opinions, score_all, top_n, IdeaScore};
use crate::similarity::{is_repetitive, SimilarityProvider};

use super::config::EventConfig;
use super::log::{Actor, LogEntry, LogPayload, PhaseTransition, TransitionCause};
use super::EngineError;

/// A message ready to be delivered, tagged with its log sequence number so
/// clients can drop duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub seq: u64,
    pub to: CollaboratorId,
    pub message: BotMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResults {
    pub scores: Vec<IdeaScore>,
    pub selected: Vec<SelectedIdea>,
}

/// Score report for an event at any point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub event_id: String,
    pub phase: PhaseKind,
    pub scores: Vec<IdeaScore>,
    pub selected: Vec<IdeaId>,
}

/// Shared pools and policy state of the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCore {
    pub config: EventConfig,
    pub templates: Templates,
    pub phase: PhaseKind,
    pub phase_started_at: Timestamp,
    pub roster: IndexMap<CollaboratorId, Collaborator>,
    pub ideas: Vec<Idea>,
    pub opinions: Vec<OpinionRecord>,
    pub generation: GenerationPolicy,
    pub selection: Option<SelectionPolicy>,
    pub results: Option<FinalResults>,
}

impl EventCore {
    fn new(config: EventConfig, started_at: Timestamp) -> Result<Self, EngineError> {
        let generation = GenerationPolicy::new(
            config.policy,
            config.exploration,
            config.shared_generation_bandit,
            config.goal().days_of(PhaseKind::Generation),
        )?;
        Ok(Self {
            templates: Templates::with_overrides(&config.templates),
            config,
            phase: PhaseKind::Generation,
            phase_started_at: started_at,
            roster: IndexMap::new(),
            ideas: Vec::new(),
            opinions: Vec::new(),
            generation,
            selection: None,
            results: None,
        })
    }

    /// Day of the current phase, starting at 1.
    pub fn day(&self, now: Timestamp) -> u32 {
        let elapsed = now.saturating_sub(self.phase_started_at) / self.config.day_length_ms;
        u32::try_from(elapsed).unwrap_or(u32::MAX - 1) + 1
    }

    /// When the current phase is scheduled to close, if it ever does.
    pub fn phase_deadline(&self) -> Option<Timestamp> {
        match self.phase {
            PhaseKind::Post => None,
            kind => {
                let days = u64::from(self.config.goal().days_of(kind));
                Some(self.phase_started_at + days * self.config.day_length_ms)
            }
        }
    }

    pub fn notable_count(&self) -> usize {
        self.ideas.iter().filter(|i| i.is_poolable()).count()
    }

    pub fn idea(&self, id: IdeaId) -> Option<&Idea> {
        self.ideas.get(id.0 as usize).filter(|i| i.id == id)
    }

    fn ratings_of(&self, idea: IdeaId) -> Vec<Likert7> {
        self.opinions
            .iter()
            .filter(|o| o.idea == idea)
            .map(|o| o.final_rating)
            .collect()
    }
}

/// Full reconstructible state. Its JSON encoding is the snapshot compared
/// across live runs and replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub core: EventCore,
    pub conversations: BTreeMap<CollaboratorId, ConversationState>,
    pub next_seq: u64,
    pub last_timestamp: Timestamp,
}

impl EngineState {
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("engine state always serializes")
    }
}

struct Env<'a> {
    core: &'a mut EventCore,
    provider: &'a dyn SimilarityProvider,
    now: Timestamp,
    deltas: Vec<PolicyDelta>,
}

fn env_err(e: impl std::fmt::Display) -> ConversationError {
    ConversationError::Env(e.to_string())
}

impl SessionEnv for Env<'_> {
    fn templates(&self) -> &Templates {
        &self.core.templates
    }

    fn max_text_chars(&self) -> usize {
        self.core.config.max_text_chars
    }

    fn submit_idea(
        &mut self,
        user: &CollaboratorId,
        text: String,
    ) -> Result<SubmittedIdea, ConversationError> {
        let repeated = is_repetitive(
            self.provider,
            &self.core.config.thresholds,
            &text,
            &self.core.ideas,
        );
        let id = IdeaId(self.core.ideas.len() as u64);
        let day = self.core.day(self.now);
        self.core.ideas.push(Idea {
            id,
            author: user.clone(),
            text,
            self_rating: None,
            created_at: self.now,
            notable: repeated.is_none(),
            too_similar_to: repeated.map(|m| m.idea),
            phase_day: day,
        });
        Ok(SubmittedIdea {
            id,
            notable: repeated.is_none(),
        })
    }

    fn rate_own_idea(
        &mut self,
        user: &CollaboratorId,
        idea: IdeaId,
        prompt: &GenerationPrompt,
        rating: Likert7,
    ) -> Result<(), ConversationError> {
        let entry = self
            .core
            .ideas
            .get_mut(idea.0 as usize)
            .filter(|i| &i.author == user && i.self_rating.is_none())
            .ok_or_else(|| env_err(format!("{idea} is not awaiting a self-rating from {user}")))?;
        entry.self_rating = Some(rating);
        let delta = self
            .core
            .generation
            .record_outcome(user, prompt.id, GenerationOutcome::IdeaRated(rating))
            .map_err(env_err)?;
        self.deltas.extend(delta);
        Ok(())
    }

    fn decline_prompt(
        &mut self,
        user: &CollaboratorId,
        prompt: &GenerationPrompt,
    ) -> Result<(), ConversationError> {
        let delta = self
            .core
            .generation
            .record_outcome(user, prompt.id, GenerationOutcome::RequestedDifferent)
            .map_err(env_err)?;
        self.deltas.extend(delta);
        Ok(())
    }

    fn next_prompt(
        &mut self,
        user: &CollaboratorId,
    ) -> Result<GenerationPrompt, ConversationError> {
        let day = self.core.day(self.now);
        let EventCore {
            config,
            ideas,
            generation,
            ..
        } = &mut *self.core;
        let latest = ideas.iter().rev().find(|i| &i.author == user);
        let source = InspirationSource {
            provider: self.provider,
            thresholds: &config.thresholds,
            k: config.inspirations,
            seeds: &config.seed_ideas,
        };
        generation
            .next_prompt(user, day, latest, ideas, &source)
            .map_err(env_err)
    }

    fn next_review(&mut self, user: &CollaboratorId) -> Option<(IdeaId, String)> {
        let selection = self.core.selection.as_ref()?;
        let id = selection.next_for(user, &self.core.ideas, &self.core.opinions)?;
        self.core.idea(id).map(|i| (id, i.text.clone()))
    }

    fn others_opinions(
        &self,
        user: &CollaboratorId,
        idea: IdeaId,
        initial_opinion: &str,
    ) -> OthersOpinions {
        most_dissimilar_opinions(
            self.provider,
            user,
            idea,
            initial_opinion,
            &self.core.opinions,
        )
    }

    fn record_opinion(&mut self, record: OpinionRecord) -> Result<(), ConversationError> {
        if !self.core.idea(record.idea).is_some_and(|i| i.is_poolable()) {
            return Err(env_err(format!("{} is not up for review", record.idea)));
        }
        if self
            .core
            .opinions
            .iter()
            .any(|o| o.idea == record.idea && o.author == record.author)
        {
            return Err(env_err(format!(
                "{} already rated {}",
                record.author, record.idea
            )));
        }
        let idea = record.idea;
        self.core.opinions.push(record);
        let ratings = self.core.ratings_of(idea);
        let selection = self
            .core
            .selection
            .as_mut()
            .ok_or_else(|| env_err("selection has not started"))?;
        let delta = selection.record_rating(idea, &ratings).map_err(env_err)?;
        self.deltas.extend(delta);
        Ok(())
    }

    fn now(&self) -> Timestamp {
        self.now
    }
}

/// Result of one user message.
#[derive(Debug, Clone, PartialEq)]
pub struct HandleOutcome {
    pub deliveries: Vec<Delivery>,
    /// Present when the conversation refused the event.
    pub rejected: Option<Rejection>,
}

/// One ideation event: its state plus the log that produced it.
pub struct IdeationEngine {
    state: EngineState,
    log: Vec<LogEntry>,
    provider: Arc<dyn SimilarityProvider>,
    last_rejection: Option<Rejection>,
}

impl std::fmt::Debug for IdeationEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IdeationEngine")
            .field("event_id", &self.state.core.config.event_id)
            .field("phase", &self.state.core.phase)
            .field("log_len", &self.log.len())
            .finish()
    }
}

impl IdeationEngine {
    /// Starts a new event at `config.starts_at`, or `now` when unset, and
    /// enrolls the configured roster.
    pub fn create(
        mut config: EventConfig,
        now: Timestamp,
        provider: Arc<dyn SimilarityProvider>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let start = *config.starts_at.get_or_insert(now);
        let created = LogEntry {
            seq: 0,
            timestamp: start,
            actor: Actor::System,
            payload: LogPayload::EventCreated {
                config: config.clone(),
            },
        };
        let mut engine = Self::from_created(&created, provider)?;
        for entry in config.roster.clone() {
            engine.enroll(CollaboratorId::new(entry.id), entry.alias, start)?;
        }
        Ok(engine)
    }

    /// Engine state right after the given `EventCreated` entry.
    pub(super) fn from_created(
        entry: &LogEntry,
        provider: Arc<dyn SimilarityProvider>,
    ) -> Result<Self, EngineError> {
        let LogPayload::EventCreated { config } = &entry.payload else {
            return Err(EngineError::CorruptLog {
                seq: entry.seq,
                reason: "log must start with EventCreated".into(),
            });
        };
        if entry.seq != 0 {
            return Err(EngineError::CorruptLog {
                seq: entry.seq,
                reason: "EventCreated must have seq 0".into(),
            });
        }
        config.validate()?;
        let core = EventCore::new(config.clone(), entry.timestamp)?;
        Ok(Self {
            state: EngineState {
                core,
                conversations: BTreeMap::new(),
                next_seq: 1,
                last_timestamp: entry.timestamp,
            },
            log: vec![entry.clone()],
            provider,
            last_rejection: None,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn core(&self) -> &EventCore {
        &self.state.core
    }

    pub fn config(&self) -> &EventConfig {
        &self.state.core.config
    }

    pub fn phase(&self) -> PhaseKind {
        self.state.core.phase
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn provider(&self) -> &Arc<dyn SimilarityProvider> {
        &self.provider
    }

    pub fn conversation(&self, user: &CollaboratorId) -> Option<&ConversationState> {
        self.state.conversations.get(user)
    }

    pub fn snapshot_json(&self) -> String {
        self.state.snapshot_json()
    }

    /// Messages for `user` with a sequence number above `after`.
    pub fn deliveries_since(&self, user: &CollaboratorId, after: Option<u64>) -> Vec<Delivery> {
        self.log
            .iter()
            .filter(|e| after.is_none_or(|a| e.seq > a))
            .filter_map(|e| match &e.payload {
                LogPayload::BotMessage { to, message } if to == user => Some(Delivery {
                    seq: e.seq,
                    to: to.clone(),
                    message: message.clone(),
                }),
                _ => None,
            })
            .collect()
    }

    fn clamp_time(&self, now: Timestamp) -> Timestamp {
        now.max(self.state.last_timestamp)
    }

    pub fn enroll(
        &mut self,
        id: CollaboratorId,
        alias: Option<String>,
        now: Timestamp,
    ) -> Result<Vec<Delivery>, EngineError> {
        let mut deliveries = self.tick(now)?;
        if self.state.core.roster.contains_key(&id) {
            return Err(EngineError::AlreadyEnrolled(id));
        }
        let alias = alias.unwrap_or_else(|| format!("Member {}", self.state.core.roster.len() + 1));
        if alias == id.0 {
            return Err(EngineError::InvalidConfig(format!(
                "alias of {id} must not reveal the id"
            )));
        }
        let now = self.clamp_time(now);
        let collaborator = Collaborator {
            id,
            display_alias: alias,
            joined_at: now,
        };
        let batch = self.process(now, Actor::System, LogPayload::Enrolled { collaborator })?;
        deliveries.extend(deliveries_of(&batch));
        Ok(deliveries)
    }

    /// Routes one user event through the user's conversation. Phases whose
    /// scheduled end has passed are closed first.
    pub fn handle_incoming(
        &mut self,
        user: &CollaboratorId,
        event: UserEvent,
        now: Timestamp,
    ) -> Result<HandleOutcome, EngineError> {
        if !self.state.core.roster.contains_key(user) {
            return Err(EngineError::UnknownUser(user.clone()));
        }
        let mut deliveries = self.tick(now)?;
        if self.state.core.phase == PhaseKind::Post {
            return Err(EngineError::PhaseClosed);
        }
        let now = self.clamp_time(now);
        let batch = self.process(
            now,
            Actor::User(user.clone()),
            LogPayload::UserEvent { event },
        )?;
        deliveries.extend(deliveries_of(&batch));
        let rejected = self.last_rejection.take();
        Ok(HandleOutcome {
            deliveries,
            rejected,
        })
    }

    /// Moves to the next phase on an administrator's request.
    pub fn advance_phase(
        &mut self,
        now: Timestamp,
    ) -> Result<(PhaseTransition, Vec<Delivery>), EngineError> {
        let to = next_phase(self.state.core.phase).ok_or(EngineError::AlreadyFinal)?;
        let transition = PhaseTransition {
            from: self.state.core.phase,
            to,
            cause: TransitionCause::Admin,
        };
        let now = self.clamp_time(now);
        let batch = self.process(now, Actor::System, LogPayload::PhaseTransition(transition))?;
        Ok((transition, deliveries_of(&batch)))
    }

    /// Closes every phase whose scheduled end is at or before `now`.
    pub fn tick(&mut self, now: Timestamp) -> Result<Vec<Delivery>, EngineError> {
        let mut deliveries = Vec::new();
        if !self.state.core.config.auto_advance {
            return Ok(deliveries);
        }
        while let Some(deadline) = self.state.core.phase_deadline() {
            if deadline > now {
                break;
            }
            let to =
                next_phase(self.state.core.phase).expect("phases with a deadline have a successor");
            let transition = PhaseTransition {
                from: self.state.core.phase,
                to,
                cause: TransitionCause::Clock,
            };
            let at = self.clamp_time(deadline);
            let batch = self.process(at, Actor::System, LogPayload::PhaseTransition(transition))?;
            deliveries.extend(deliveries_of(&batch));
        }
        Ok(deliveries)
    }

    pub fn report(&self) -> ScoreReport {
        let core = &self.state.core;
        let scores = match &core.results {
            Some(r) => r.scores.clone(),
            None => score_all(&core.opinions, core.config.se_penalty),
        };
        let selected = match &core.results {
            Some(r) => r.selected.iter().map(|s| s.idea).collect(),
            None => top_n(&scores, core.config.top_n),
        };
        ScoreReport {
            event_id: core.config.event_id.clone(),
            phase: core.phase,
            scores,
            selected,
        }
    }

    /// Applies one input and appends it, with everything it produced, to the
    /// log. Nothing changes when an error is returned.
    pub(super) fn process(
        &mut self,
        timestamp: Timestamp,
        actor: Actor,
        input: LogPayload,
    ) -> Result<Vec<LogEntry>, EngineError> {
        let mut core = self.state.core.clone();
        let mut outputs: Vec<(Actor, LogPayload)> = Vec::new();
        let mut conversation_updates: Vec<ConversationState> = Vec::new();
        self.last_rejection = None;

        match (&input, &actor) {
            (LogPayload::Enrolled { collaborator }, Actor::System) => {
                if core.roster.contains_key(&collaborator.id) {
                    return Err(EngineError::AlreadyEnrolled(collaborator.id.clone()));
                }
                core.roster
                    .insert(collaborator.id.clone(), collaborator.clone());
                let (conv, messages, deltas) = open_conversation(
                    &mut core,
                    self.provider.as_ref(),
                    &collaborator.id,
                    timestamp,
                )?;
                outputs.extend(
                    deltas
                        .into_iter()
                        .map(|d| (Actor::System, LogPayload::PolicyStateDelta(d))),
                );
                outputs.extend(messages.into_iter().map(|m| bot(&collaborator.id, m)));
                conversation_updates.push(conv);
            }
            (LogPayload::UserEvent { event }, Actor::User(user)) => {
                if !core.roster.contains_key(user) {
                    return Err(EngineError::UnknownUser(user.clone()));
                }
                if core.phase == PhaseKind::Post {
                    return Err(EngineError::PhaseClosed);
                }
                let state = self
                    .state
                    .conversations
                    .get(user)
                    .ok_or_else(|| EngineError::UnknownUser(user.clone()))?;
                let mut env = Env {
                    core: &mut core,
                    provider: self.provider.as_ref(),
                    now: timestamp,
                    deltas: Vec::new(),
                };
                let transition = conversation::advance(state, event, &mut env)?;
                let deltas = env.deltas;
                outputs.extend(
                    deltas
                        .into_iter()
                        .map(|d| (Actor::System, LogPayload::PolicyStateDelta(d))),
                );
                outputs.extend(transition.messages.into_iter().map(|m| bot(user, m)));
                conversation_updates.push(transition.state);
                self.last_rejection = transition.rejected;
            }
            (LogPayload::PhaseTransition(t), Actor::System) => {
                if t.from != core.phase || next_phase(t.from) != Some(t.to) {
                    return Err(EngineError::InvalidTransition(*t));
                }
                let (messages, states, deltas) =
                    enter_phase(&mut core, self.provider.as_ref(), t.to, timestamp)?;
                outputs.extend(
                    deltas
                        .into_iter()
                        .map(|d| (Actor::System, LogPayload::PolicyStateDelta(d))),
                );
                outputs.extend(messages.into_iter().map(|(to, m)| bot(&to, m)));
                conversation_updates.extend(states);
            }
            (LogPayload::EventCreated { .. }, _) => {
                return Err(EngineError::CorruptLog {
                    seq: self.state.next_seq,
                    reason: "EventCreated after the start of the log".into(),
                })
            }
            (payload, actor) => {
                return Err(EngineError::CorruptLog {
                    seq: self.state.next_seq,
                    reason: format!("{actor:?} cannot submit {payload:?}"),
                })
            }
        }

        // commit
        let mut seq = self.state.next_seq;
        let mut batch = Vec::with_capacity(outputs.len() + 1);
        batch.push(LogEntry {
            seq,
            timestamp,
            actor,
            payload: input,
        });
        for (actor, payload) in outputs {
            seq += 1;
            batch.push(LogEntry {
                seq,
                timestamp,
                actor,
                payload,
            });
        }
        let last_seq = seq;
        for mut conv in conversation_updates {
            conv.transcript_cursor = last_seq;
            self.state.conversations.insert(conv.user.clone(), conv);
        }
        self.state.core = core;
        self.state.next_seq = last_seq + 1;
        self.state.last_timestamp = timestamp;
        self.log.extend(batch.iter().cloned());
        Ok(batch)
    }
}

fn bot(to: &CollaboratorId, message: BotMessage) -> (Actor, LogPayload) {
    (
        Actor::System,
        LogPayload::BotMessage {
            to: to.clone(),
            message,
        },
    )
}

fn deliveries_of(batch: &[LogEntry]) -> Vec<Delivery> {
    batch
        .iter()
        .filter_map(|e| match &e.payload {
            LogPayload::BotMessage { to, message } => Some(Delivery {
                seq: e.seq,
                to: to.clone(),
                message: message.clone(),
            }),
            _ => None,
        })
        .collect()
}

pub fn next_phase(phase: PhaseKind) -> Option<PhaseKind> {
    match phase {
        PhaseKind::Generation => Some(PhaseKind::Selection),
        PhaseKind::Selection => Some(PhaseKind::Post),
        PhaseKind::Post => None,
    }
}

type Opened = (ConversationState, Vec<BotMessage>, Vec<PolicyDelta>);

/// Conversation of a user joining (or re-entering) the current phase.
fn open_conversation(
    core: &mut EventCore,
    provider: &dyn SimilarityProvider,
    user: &CollaboratorId,
    now: Timestamp,
) -> Result<Opened, EngineError> {
    let phase = core.phase;
    let goal = core.config.goal.clone();
    let notable = core.notable_count();
    let selected = core
        .results
        .as_ref()
        .map(|r| r.selected.clone())
        .unwrap_or_default();
    let intro = conversation::phase_intro(phase, &goal, notable, selected, &core.templates);
    let mut env = Env {
        core,
        provider,
        now,
        deltas: Vec::new(),
    };
    let (state, messages) = match phase {
        PhaseKind::Generation => conversation::start_generation(user, intro, &mut env)?,
        PhaseKind::Selection => conversation::start_selection(user, intro, &mut env, 0),
        PhaseKind::Post => (conversation::finish(user, 0), intro),
    };
    Ok((state, messages, env.deltas))
}

type Entered = (
    Vec<(CollaboratorId, BotMessage)>,
    Vec<ConversationState>,
    Vec<PolicyDelta>,
);

fn enter_phase(
    core: &mut EventCore,
    provider: &dyn SimilarityProvider,
    to: PhaseKind,
    now: Timestamp,
) -> Result<Entered, EngineError> {
    match to {
        PhaseKind::Selection => {
            core.selection = Some(SelectionPolicy::start(
                core.config.policy,
                &core.ideas,
                core.config.exploration,
            )?);
        }
        PhaseKind::Post => {
            let scores = score_all(&core.opinions, core.config.se_penalty);
            let chosen = top_n(&scores, core.config.top_n);
            let selected = chosen
                .iter()
                .enumerate()
                .map(|(rank, id)| {
                    let score = scores
                        .iter()
                        .find(|s| s.idea == *id)
                        .expect("chosen from scores");
                    let mut exemplars = OthersOpinions::default();
                    for (category, rec) in exemplary_opinions(*id, &core.opinions) {
                        exemplars.group_mut(category).push(rec.revised_text);
                    }
                    SelectedIdea {
                        rank: rank + 1,
                        idea: *id,
                        text: core.idea(*id).map(|i| i.text.clone()).unwrap_or_default(),
                        mean: score.mean,
                        n: score.n,
                        exemplars,
                    }
                })
                .collect();
            core.results = Some(FinalResults { scores, selected });
        }
        PhaseKind::Generation => unreachable!("generation is never entered by a transition"),
    }
    core.phase = to;
    core.phase_started_at = now;

    let users: Vec<CollaboratorId> = core.roster.keys().cloned().collect();
    let mut messages = Vec::new();
    let mut states = Vec::new();
    let mut deltas = Vec::new();
    for user in users {
        let (state, msgs, d) = open_conversation(core, provider, &user, now)?;
        messages.extend(msgs.into_iter().map(|m| (user.clone(), m)));
        states.push(state);
        deltas.extend(d);
    }
    Ok((messages, states, deltas))
}
