//! Per-collaborator dialogue state machine.
//!
//! Generation cycle: show inspirations and an ideation method, take an idea,
//! ask for a self-rating, repeat. Selection cycle: present an idea, take an
//! initial opinion, show the most contrasting opinions of others, invite a
//! revision, ask for a rating, move to the next idea. Either cycle can be
//! paused and resumed.
//!
//! The machine itself is pure. Everything it needs from the rest of the event
//! (pools, policies, the similarity provider) goes through [`SessionEnv`],
//! and it only calls into the environment on accepted transitions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_idea_text, CollaboratorId, IdeaId, Likert7, OpinionRecord, PhaseKind,
};
use crate::messages::{
    Acknowledgement, BotMessage, InputMode, MessageContent, OthersOpinions, RatingSubject,
    SelectedIdea, Templates,
};
use crate::policies::GenerationPrompt;
use crate::similarity::SimilarityProvider;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    AwaitIdea,
    AwaitSelfRating,
    AwaitInitialOpinion,
    AwaitReevaluation,
    AwaitIdeaRating,
    /// Holds the step to return to; never another `Paused` or `Done`.
    Paused(Box<Step>),
    Done,
}

impl Step {
    pub const ACTIVE: [Step; 5] = [
        Step::AwaitIdea,
        Step::AwaitSelfRating,
        Step::AwaitInitialOpinion,
        Step::AwaitReevaluation,
        Step::AwaitIdeaRating,
    ];

    pub fn paused(inner: Step) -> Option<Step> {
        inner.is_active().then(|| Step::Paused(Box::new(inner)))
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, Step::Paused(_) | Step::Done)
    }

    /// Whether the step can occur during `phase`.
    pub fn legal_in(&self, phase: PhaseKind) -> bool {
        match (self, phase) {
            (Step::Done, _) => true,
            (Step::Paused(inner), _) => inner.is_active() && inner.legal_in(phase),
            (Step::AwaitIdea | Step::AwaitSelfRating, PhaseKind::Generation) => true,
            (
                Step::AwaitInitialOpinion | Step::AwaitReevaluation | Step::AwaitIdeaRating,
                PhaseKind::Selection,
            ) => true,
            _ => false,
        }
    }

    pub fn input_mode(&self) -> InputMode {
        match self {
            Step::AwaitIdea => InputMode::IdeaText,
            Step::AwaitSelfRating | Step::AwaitIdeaRating => InputMode::Rating,
            Step::AwaitInitialOpinion => InputMode::OpinionText,
            Step::AwaitReevaluation => InputMode::RevisionOrKeep,
            Step::Paused(_) => InputMode::Paused,
            Step::Done => InputMode::Closed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserEvent {
    Text(String),
    RateButton(Likert7),
    ShowOtherIdeas,
    PauseButton,
    ResumeButton,
    KeepInitialOpinion,
}

impl UserEvent {
    /// One representative of every event shape, for exhaustive checks.
    pub fn samples() -> Vec<UserEvent> {
        vec![
            UserEvent::Text("a sample message".into()),
            UserEvent::RateButton(Likert7::new(5).expect("valid")),
            UserEvent::ShowOtherIdeas,
            UserEvent::PauseButton,
            UserEvent::ResumeButton,
            UserEvent::KeepInitialOpinion,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            UserEvent::Text(_) => "text",
            UserEvent::RateButton(_) => "rate button",
            UserEvent::ShowOtherIdeas => "show other ideas",
            UserEvent::PauseButton => "pause",
            UserEvent::ResumeButton => "resume",
            UserEvent::KeepInitialOpinion => "keep initial opinion",
        }
    }
}

/// What the user is currently responding to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveContext {
    None,
    Generation {
        prompt: GenerationPrompt,
        pending_idea: Option<IdeaId>,
    },
    Review {
        idea: IdeaId,
        idea_text: String,
        initial_opinion: Option<String>,
        others: Option<OthersOpinions>,
        revised_opinion: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationState {
    pub user: CollaboratorId,
    pub phase: PhaseKind,
    pub step: Step,
    pub active: ActiveContext,
    /// Sequence number of the last log entry that touched this conversation.
    pub transcript_cursor: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    #[error("{event} is not available while {step}")]
    IllegalEvent { step: String, event: String },
    #[error(transparent)]
    InvalidText(#[from] crate::domain::TextRejection),
}

/// Errors from the environment. These indicate a broken invariant outside
/// the state machine, not a user mistake.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConversationError {
    #[error("conversation state is inconsistent: {0}")]
    Inconsistent(String),
    #[error("environment failure: {0}")]
    Env(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: ConversationState,
    pub messages: Vec<BotMessage>,
    /// Set when the event was refused; `state` is then the input state.
    pub rejected: Option<Rejection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmittedIdea {
    pub id: IdeaId,
    pub notable: bool,
}

/// The slice of the ideation event a conversation acts on.
pub trait SessionEnv {
    fn templates(&self) -> &Templates;
    fn max_text_chars(&self) -> usize;
    /// Adds a (validated) idea to the pool, checking it for repetition.
    fn submit_idea(
        &mut self,
        user: &CollaboratorId,
        text: String,
    ) -> Result<SubmittedIdea, ConversationError>;
    /// Stores the self-rating and credits the prompt that led to the idea.
    fn rate_own_idea(
        &mut self,
        user: &CollaboratorId,
        idea: IdeaId,
        prompt: &GenerationPrompt,
        rating: Likert7,
    ) -> Result<(), ConversationError>;
    /// Credits the prompt with the "requested different" outcome.
    fn decline_prompt(
        &mut self,
        user: &CollaboratorId,
        prompt: &GenerationPrompt,
    ) -> Result<(), ConversationError>;
    fn next_prompt(&mut self, user: &CollaboratorId)
        -> Result<GenerationPrompt, ConversationError>;
    /// The next idea this user should review, with its text.
    fn next_review(&mut self, user: &CollaboratorId) -> Option<(IdeaId, String)>;
    fn others_opinions(
        &self,
        user: &CollaboratorId,
        idea: IdeaId,
        initial_opinion: &str,
    ) -> OthersOpinions;
    fn record_opinion(&mut self, record: OpinionRecord) -> Result<(), ConversationError>;
    fn now(&self) -> crate::domain::Timestamp;
}

fn step_label(step: &Step) -> String {
    match step {
        Step::AwaitIdea => "waiting for an idea".into(),
        Step::AwaitSelfRating => "waiting for a rating of your idea".into(),
        Step::AwaitInitialOpinion => "waiting for your opinion".into(),
        Step::AwaitReevaluation => "waiting for a revised opinion".into(),
        Step::AwaitIdeaRating => "waiting for a rating of the idea".into(),
        Step::Paused(_) => "paused".into(),
        Step::Done => "finished".into(),
    }
}

fn reject(state: &ConversationState, rejection: Rejection, templates: &Templates) -> Transition {
    let message = templates.render(
        MessageContent::Error {
            reason: rejection.to_string(),
        },
        state.step.input_mode(),
    );
    Transition {
        state: state.clone(),
        messages: vec![message],
        rejected: Some(rejection),
    }
}

fn illegal(state: &ConversationState, event: &UserEvent, templates: &Templates) -> Transition {
    reject(
        state,
        Rejection::IllegalEvent {
            step: step_label(&state.step),
            event: event.name().into(),
        },
        templates,
    )
}

fn accept(state: ConversationState, messages: Vec<BotMessage>) -> Transition {
    Transition {
        state,
        messages,
        rejected: None,
    }
}

fn review_messages(templates: &Templates, idea: IdeaId, text: &str) -> Vec<BotMessage> {
    vec![
        templates.render(
            MessageContent::IdeaPresentation {
                idea,
                text: text.to_owned(),
            },
            InputMode::OpinionText,
        ),
        templates.render(
            MessageContent::OpinionRequest { idea },
            InputMode::OpinionText,
        ),
    ]
}

fn reevaluate_messages(
    templates: &Templates,
    idea: IdeaId,
    others: &OthersOpinions,
) -> Vec<BotMessage> {
    vec![
        templates.render(
            MessageContent::OthersOpinions {
                idea,
                opinions: others.clone(),
            },
            InputMode::RevisionOrKeep,
        ),
        templates.render(
            MessageContent::ReevaluateSuggestion { idea },
            InputMode::RevisionOrKeep,
        ),
    ]
}

/// Messages that bring the user back to `step` after a pause.
fn restate(
    state: &ConversationState,
    step: &Step,
    templates: &Templates,
) -> Result<Vec<BotMessage>, ConversationError> {
    let inconsistent =
        || ConversationError::Inconsistent(format!("no active context for {step:?}"));
    match (step, &state.active) {
        (Step::AwaitIdea, ActiveContext::Generation { prompt, .. }) => {
            Ok(templates.prompt_messages(prompt))
        }
        (
            Step::AwaitSelfRating,
            ActiveContext::Generation {
                pending_idea: Some(idea),
                ..
            },
        ) => Ok(vec![templates.render(
            MessageContent::RatingRequest {
                subject: RatingSubject::OwnIdea(*idea),
            },
            InputMode::Rating,
        )]),
        (
            Step::AwaitInitialOpinion,
            ActiveContext::Review {
                idea, idea_text, ..
            },
        ) => Ok(review_messages(templates, *idea, idea_text)),
        (
            Step::AwaitReevaluation,
            ActiveContext::Review {
                idea,
                others: Some(others),
                ..
            },
        ) => Ok(reevaluate_messages(templates, *idea, others)),
        (Step::AwaitIdeaRating, ActiveContext::Review { idea, .. }) => Ok(vec![templates.render(
            MessageContent::RatingRequest {
                subject: RatingSubject::ReviewedIdea(*idea),
            },
            InputMode::Rating,
        )]),
        _ => Err(inconsistent()),
    }
}

pub fn pause(state: &ConversationState, templates: &Templates) -> Transition {
    match Step::paused(state.step.clone()) {
        Some(paused) => {
            let next = ConversationState {
                step: paused,
                ..state.clone()
            };
            let msg = templates.render(
                MessageContent::Thanks {
                    ack: Acknowledgement::Paused,
                },
                InputMode::Paused,
            );
            accept(next, vec![msg])
        }
        None => illegal(state, &UserEvent::PauseButton, templates),
    }
}

pub fn resume(
    state: &ConversationState,
    templates: &Templates,
) -> Result<Transition, ConversationError> {
    let Step::Paused(inner) = &state.step else {
        return Ok(illegal(state, &UserEvent::ResumeButton, templates));
    };
    let inner = (**inner).clone();
    let messages = restate(state, &inner, templates)?;
    let next = ConversationState {
        step: inner,
        ..state.clone()
    };
    Ok(accept(next, messages))
}

/// Opening of the generation cycle for one user.
pub fn start_generation(
    user: &CollaboratorId,
    intro: Vec<BotMessage>,
    env: &mut dyn SessionEnv,
) -> Result<(ConversationState, Vec<BotMessage>), ConversationError> {
    let prompt = env.next_prompt(user)?;
    let mut messages = intro;
    messages.extend(env.templates().prompt_messages(&prompt));
    let state = ConversationState {
        user: user.clone(),
        phase: PhaseKind::Generation,
        step: Step::AwaitIdea,
        active: ActiveContext::Generation {
            prompt,
            pending_idea: None,
        },
        transcript_cursor: 0,
    };
    Ok((state, messages))
}

fn next_review_or_done(
    user: &CollaboratorId,
    env: &mut dyn SessionEnv,
    mut messages: Vec<BotMessage>,
) -> (Step, ActiveContext, Vec<BotMessage>) {
    match env.next_review(user) {
        Some((idea, text)) => {
            messages.extend(review_messages(env.templates(), idea, &text));
            (
                Step::AwaitInitialOpinion,
                ActiveContext::Review {
                    idea,
                    idea_text: text,
                    initial_opinion: None,
                    others: None,
                    revised_opinion: None,
                },
                messages,
            )
        }
        None => {
            messages.push(env.templates().render(
                MessageContent::Thanks {
                    ack: Acknowledgement::ReviewComplete,
                },
                InputMode::Closed,
            ));
            (Step::Done, ActiveContext::None, messages)
        }
    }
}

/// Opening of the selection cycle for one user.
pub fn start_selection(
    user: &CollaboratorId,
    intro: Vec<BotMessage>,
    env: &mut dyn SessionEnv,
    transcript_cursor: u64,
) -> (ConversationState, Vec<BotMessage>) {
    let (step, active, messages) = next_review_or_done(user, env, intro);
    let state = ConversationState {
        user: user.clone(),
        phase: PhaseKind::Selection,
        step,
        active,
        transcript_cursor,
    };
    (state, messages)
}

/// Closing state after selection.
pub fn finish(user: &CollaboratorId, transcript_cursor: u64) -> ConversationState {
    ConversationState {
        user: user.clone(),
        phase: PhaseKind::Post,
        step: Step::Done,
        active: ActiveContext::None,
        transcript_cursor,
    }
}

/// Applies one user event. Illegal events and invalid text come back as a
/// rejected [`Transition`] carrying the unchanged state and an error message.
pub fn advance(
    state: &ConversationState,
    event: &UserEvent,
    env: &mut dyn SessionEnv,
) -> Result<Transition, ConversationError> {
    if !state.step.legal_in(state.phase) {
        return Err(ConversationError::Inconsistent(format!(
            "{:?} cannot occur during {:?}",
            state.step, state.phase
        )));
    }
    match (&state.step, event) {
        (Step::Paused(_), UserEvent::ResumeButton) => return resume(state, env.templates()),
        (step, UserEvent::PauseButton) if step.is_active() => {
            return Ok(pause(state, env.templates()))
        }
        _ => {}
    }

    let user = state.user.clone();
    match (&state.step, event, &state.active) {
        (Step::AwaitIdea, UserEvent::Text(raw), ActiveContext::Generation { prompt, .. }) => {
            let text = match validate_idea_text(raw, env.max_text_chars()) {
                Ok(t) => t,
                Err(e) => return Ok(reject(state, e.into(), env.templates())),
            };
            let submitted = env.submit_idea(&user, text)?;
            let templates = env.templates();
            let messages = vec![
                templates.render(
                    MessageContent::Thanks {
                        ack: Acknowledgement::IdeaRecorded {
                            idea: submitted.id,
                            notable: submitted.notable,
                        },
                    },
                    InputMode::Rating,
                ),
                templates.render(
                    MessageContent::RatingRequest {
                        subject: RatingSubject::OwnIdea(submitted.id),
                    },
                    InputMode::Rating,
                ),
            ];
            let next = ConversationState {
                step: Step::AwaitSelfRating,
                active: ActiveContext::Generation {
                    prompt: prompt.clone(),
                    pending_idea: Some(submitted.id),
                },
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (Step::AwaitIdea, UserEvent::ShowOtherIdeas, ActiveContext::Generation { prompt, .. }) => {
            env.decline_prompt(&user, prompt)?;
            let prompt = env.next_prompt(&user)?;
            let messages = env.templates().prompt_messages(&prompt);
            let next = ConversationState {
                active: ActiveContext::Generation {
                    prompt,
                    pending_idea: None,
                },
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (
            Step::AwaitSelfRating,
            UserEvent::RateButton(rating),
            ActiveContext::Generation {
                prompt,
                pending_idea: Some(idea),
            },
        ) => {
            env.rate_own_idea(&user, *idea, prompt, *rating)?;
            let prompt = env.next_prompt(&user)?;
            let messages = env.templates().prompt_messages(&prompt);
            let next = ConversationState {
                step: Step::AwaitIdea,
                active: ActiveContext::Generation {
                    prompt,
                    pending_idea: None,
                },
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (
            Step::AwaitInitialOpinion,
            UserEvent::Text(raw),
            ActiveContext::Review {
                idea, idea_text, ..
            },
        ) => {
            let text = match validate_idea_text(raw, env.max_text_chars()) {
                Ok(t) => t,
                Err(e) => return Ok(reject(state, e.into(), env.templates())),
            };
            let others = env.others_opinions(&user, *idea, &text);
            let messages = reevaluate_messages(env.templates(), *idea, &others);
            let next = ConversationState {
                step: Step::AwaitReevaluation,
                active: ActiveContext::Review {
                    idea: *idea,
                    idea_text: idea_text.clone(),
                    initial_opinion: Some(text),
                    others: Some(others),
                    revised_opinion: None,
                },
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (
            Step::AwaitReevaluation,
            UserEvent::Text(_) | UserEvent::KeepInitialOpinion,
            ActiveContext::Review {
                idea,
                idea_text,
                initial_opinion: Some(initial),
                others,
                ..
            },
        ) => {
            let revised = match event {
                UserEvent::Text(raw) => match validate_idea_text(raw, env.max_text_chars()) {
                    Ok(t) => t,
                    Err(e) => return Ok(reject(state, e.into(), env.templates())),
                },
                _ => initial.clone(),
            };
            let templates = env.templates();
            let messages = vec![
                templates.render(
                    MessageContent::Thanks {
                        ack: Acknowledgement::OpinionShared,
                    },
                    InputMode::Rating,
                ),
                templates.render(
                    MessageContent::RatingRequest {
                        subject: RatingSubject::ReviewedIdea(*idea),
                    },
                    InputMode::Rating,
                ),
            ];
            let next = ConversationState {
                step: Step::AwaitIdeaRating,
                active: ActiveContext::Review {
                    idea: *idea,
                    idea_text: idea_text.clone(),
                    initial_opinion: Some(initial.clone()),
                    others: others.clone(),
                    revised_opinion: Some(revised),
                },
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (
            Step::AwaitIdeaRating,
            UserEvent::RateButton(rating),
            ActiveContext::Review {
                idea,
                initial_opinion: Some(initial),
                revised_opinion: Some(revised),
                ..
            },
        ) => {
            let record = OpinionRecord::new(
                *idea,
                user.clone(),
                initial.clone(),
                revised.clone(),
                *rating,
                env.now(),
            );
            env.record_opinion(record)?;
            let ack = env.templates().render(
                MessageContent::Thanks {
                    ack: Acknowledgement::RatingRecorded,
                },
                InputMode::OpinionText,
            );
            let (step, active, messages) = next_review_or_done(&user, env, vec![ack]);
            let next = ConversationState {
                step,
                active,
                ..state.clone()
            };
            Ok(accept(next, messages))
        }
        (step, _, active) if step.is_active() && !context_matches(step, active) => Err(
            ConversationError::Inconsistent(format!("{step:?} with context {active:?}")),
        ),
        _ => Ok(illegal(state, event, env.templates())),
    }
}

fn context_matches(step: &Step, active: &ActiveContext) -> bool {
    match (step, active) {
        (Step::AwaitIdea, ActiveContext::Generation { .. }) => true,
        (Step::AwaitSelfRating, ActiveContext::Generation { pending_idea, .. }) => {
            pending_idea.is_some()
        }
        (Step::AwaitInitialOpinion, ActiveContext::Review { .. }) => true,
        (
            Step::AwaitReevaluation,
            ActiveContext::Review {
                initial_opinion, ..
            },
        ) => initial_opinion.is_some(),
        (
            Step::AwaitIdeaRating,
            ActiveContext::Review {
                revised_opinion, ..
            },
        ) => revised_opinion.is_some(),
        _ => false,
    }
}

/// Up to one opinion per category from people other than `user`, choosing
/// in each category the final opinion least similar to the user's initial
/// one. Ties keep the earliest record.
pub fn most_dissimilar_opinions(
    provider: &dyn SimilarityProvider,
    user: &CollaboratorId,
    idea: IdeaId,
    initial_opinion: &str,
    records: &[OpinionRecord],
) -> OthersOpinions {
    let candidates: Vec<&OpinionRecord> = records
        .iter()
        .filter(|r| r.idea == idea && &r.author != user)
        .collect();
    let mut out = OthersOpinions::default();
    if candidates.is_empty() {
        return out;
    }
    let texts: Vec<&str> = candidates.iter().map(|r| r.revised_text.as_str()).collect();
    let scores = provider.score_many(initial_opinion, &texts);
    for category in crate::domain::OpinionCategory::ALL {
        let best = candidates
            .iter()
            .zip(&scores)
            .filter(|(r, _)| r.category == category)
            .fold(None::<(&OpinionRecord, f64)>, |best, (r, s)| match best {
                Some((_, b)) if s.value() >= b => best,
                _ => Some((r, s.value())),
            });
        if let Some((r, _)) = best {
            out.group_mut(category).push(r.revised_text.clone());
        }
    }
    out
}

/// Post-phase intro, and the selection/generation intros.
pub fn phase_intro(
    phase: PhaseKind,
    goal: &str,
    notable_count: usize,
    selected: Vec<SelectedIdea>,
    templates: &Templates,
) -> Vec<BotMessage> {
    let (idea_count, selected, expects) = match phase {
        PhaseKind::Generation => (None, Vec::new(), InputMode::IdeaText),
        PhaseKind::Selection => (Some(notable_count), Vec::new(), InputMode::OpinionText),
        PhaseKind::Post => (None, selected, InputMode::Closed),
    };
    vec![templates.render(
        MessageContent::Intro {
            phase,
            goal: goal.to_owned(),
            idea_count,
            selected,
        },
        expects,
    )]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::OpinionCategory;
    use crate::policies::{IdeationMethod, Inspiration, PromptId};
    use crate::similarity::{InspirationMode, ReferenceProvider};

    /// Minimal environment: counts calls, serves a fixed list of reviews.
    #[derive(Default)]
    struct FakeEnv {
        templates: Templates,
        ideas: Vec<(CollaboratorId, String)>,
        self_ratings: Vec<(IdeaId, PromptId, Likert7)>,
        declined: Vec<PromptId>,
        prompts: u64,
        reviews: Vec<(IdeaId, String)>,
        opinions: Vec<OpinionRecord>,
    }

    impl FakeEnv {
        fn with_reviews(n: u64) -> Self {
            Self {
                reviews: (0..n)
                    .map(|i| (IdeaId(100 + i), format!("idea {i}")))
                    .collect(),
                ..Default::default()
            }
        }
    }

    impl SessionEnv for FakeEnv {
        fn templates(&self) -> &Templates {
            &self.templates
        }
        fn max_text_chars(&self) -> usize {
            1000
        }
        fn submit_idea(
            &mut self,
            user: &CollaboratorId,
            text: String,
        ) -> Result<SubmittedIdea, ConversationError> {
            self.ideas.push((user.clone(), text.clone()));
            Ok(SubmittedIdea {
                id: IdeaId(self.ideas.len() as u64 - 1),
                notable: !text.contains("repeat"),
            })
        }
        fn rate_own_idea(
            &mut self,
            _: &CollaboratorId,
            idea: IdeaId,
            prompt: &GenerationPrompt,
            rating: Likert7,
        ) -> Result<(), ConversationError> {
            self.self_ratings.push((idea, prompt.id, rating));
            Ok(())
        }
        fn decline_prompt(
            &mut self,
            _: &CollaboratorId,
            prompt: &GenerationPrompt,
        ) -> Result<(), ConversationError> {
            self.declined.push(prompt.id);
            Ok(())
        }
        fn next_prompt(
            &mut self,
            _: &CollaboratorId,
        ) -> Result<GenerationPrompt, ConversationError> {
            self.prompts += 1;
            Ok(GenerationPrompt {
                id: PromptId(self.prompts),
                mode: InspirationMode::Dissimilar,
                method: IdeationMethod::AnyIdea,
                inspirations: vec![Inspiration {
                    idea: None,
                    text: "seed".into(),
                }],
            })
        }
        fn next_review(&mut self, user: &CollaboratorId) -> Option<(IdeaId, String)> {
            self.reviews
                .iter()
                .find(|(id, _)| {
                    !self
                        .opinions
                        .iter()
                        .any(|o| o.idea == *id && &o.author == user)
                })
                .cloned()
        }
        fn others_opinions(
            &self,
            user: &CollaboratorId,
            idea: IdeaId,
            initial: &str,
        ) -> OthersOpinions {
            most_dissimilar_opinions(&ReferenceProvider, user, idea, initial, &self.opinions)
        }
        fn record_opinion(&mut self, record: OpinionRecord) -> Result<(), ConversationError> {
            self.opinions.push(record);
            Ok(())
        }
        fn now(&self) -> u64 {
            0
        }
    }

    fn user() -> CollaboratorId {
        CollaboratorId::new("u1")
    }

    fn rate(v: i64) -> UserEvent {
        UserEvent::RateButton(Likert7::new(v).unwrap())
    }

    fn generation_state(env: &mut FakeEnv) -> ConversationState {
        start_generation(&user(), vec![], env).unwrap().0
    }

    fn kinds(t: &Transition) -> Vec<crate::messages::MessageKind> {
        t.messages.iter().map(|m| m.kind).collect()
    }

    #[test]
    fn idea_then_rating_cycle() {
        use crate::messages::MessageKind::*;
        let mut env = FakeEnv::default();
        let s0 = generation_state(&mut env);
        let t = advance(
            &s0,
            &UserEvent::Text("Clear masks for expressions".into()),
            &mut env,
        )
        .unwrap();
        assert_eq!(t.state.step, Step::AwaitSelfRating);
        assert!(t.rejected.is_none());
        assert_eq!(kinds(&t), vec![Thanks, RatingRequest]);
        assert_eq!(env.ideas[0].1, "Clear masks for expressions");

        let t2 = advance(&t.state, &rate(6), &mut env).unwrap();
        assert_eq!(t2.state.step, Step::AwaitIdea);
        assert_eq!(kinds(&t2), vec![Inspirations, MethodSuggestion]);
        assert_eq!(
            env.self_ratings,
            vec![(IdeaId(0), PromptId(1), Likert7::new(6).unwrap())]
        );
    }

    #[test]
    fn show_other_ideas_only_while_waiting_for_idea() {
        let mut env = FakeEnv::default();
        let s0 = generation_state(&mut env);
        let t = advance(&s0, &UserEvent::ShowOtherIdeas, &mut env).unwrap();
        assert_eq!(env.declined, vec![PromptId(1)]);
        assert_eq!(t.state.step, Step::AwaitIdea);

        let t = advance(&t.state, &UserEvent::Text("idea".into()), &mut env).unwrap();
        let before = env.declined.len();
        let r = advance(&t.state, &UserEvent::ShowOtherIdeas, &mut env).unwrap();
        assert!(matches!(r.rejected, Some(Rejection::IllegalEvent { .. })));
        assert_eq!(r.state, t.state);
        assert_eq!(r.messages[0].kind, crate::messages::MessageKind::Error);
        assert_eq!(env.declined.len(), before);
    }

    #[test]
    fn blank_idea_rejected() {
        let mut env = FakeEnv::default();
        let s0 = generation_state(&mut env);
        let t = advance(&s0, &UserEvent::Text("   ".into()), &mut env).unwrap();
        assert_eq!(
            t.rejected,
            Some(Rejection::InvalidText(crate::domain::TextRejection::Empty))
        );
        assert_eq!(t.state, s0);
        assert!(env.ideas.is_empty());
    }

    #[test]
    fn repetitive_idea_still_asks_for_rating() {
        let mut env = FakeEnv::default();
        let s0 = generation_state(&mut env);
        let t = advance(&s0, &UserEvent::Text("repeat".into()), &mut env).unwrap();
        assert_eq!(t.state.step, Step::AwaitSelfRating);
        assert!(matches!(
            t.messages[0].content,
            MessageContent::Thanks {
                ack: Acknowledgement::IdeaRecorded { notable: false, .. }
            }
        ));
    }

    #[test]
    fn pause_and_resume() {
        use crate::messages::MessageKind::*;
        let mut env = FakeEnv::default();
        let s0 = generation_state(&mut env);
        let p = advance(&s0, &UserEvent::PauseButton, &mut env).unwrap();
        assert_eq!(p.state.step, Step::Paused(Box::new(Step::AwaitIdea)));
        let again = advance(&p.state, &UserEvent::PauseButton, &mut env).unwrap();
        assert!(again.rejected.is_some());
        assert_eq!(again.state, p.state);
        let text = advance(&p.state, &UserEvent::Text("idea".into()), &mut env).unwrap();
        assert!(text.rejected.is_some());
        let r = advance(&p.state, &UserEvent::ResumeButton, &mut env).unwrap();
        assert_eq!(r.state, s0);
        assert_eq!(kinds(&r), vec![Inspirations, MethodSuggestion]);
        assert!(advance(&s0, &UserEvent::ResumeButton, &mut env)
            .unwrap()
            .rejected
            .is_some());
    }

    #[test]
    fn selection_cycle() {
        use crate::messages::MessageKind::*;
        let mut env = FakeEnv::with_reviews(2);
        let (s, msgs) = start_selection(&user(), vec![], &mut env, 0);
        assert_eq!(s.step, Step::AwaitInitialOpinion);
        assert_eq!(
            msgs.iter().map(|m| m.kind).collect::<Vec<_>>(),
            vec![IdeaPresentation, OpinionRequest]
        );

        let t = advance(&s, &UserEvent::Text("I like it".into()), &mut env).unwrap();
        assert_eq!(t.state.step, Step::AwaitReevaluation);
        assert_eq!(kinds(&t), vec![OthersOpinions, ReevaluateSuggestion]);

        let t = advance(&t.state, &UserEvent::KeepInitialOpinion, &mut env).unwrap();
        assert_eq!(t.state.step, Step::AwaitIdeaRating);
        assert_eq!(kinds(&t), vec![Thanks, RatingRequest]);

        let t = advance(&t.state, &rate(6), &mut env).unwrap();
        assert_eq!(env.opinions[0].revised_text, env.opinions[0].initial_text);
        assert_eq!(env.opinions[0].category, OpinionCategory::Support);
        assert_eq!(t.state.step, Step::AwaitInitialOpinion);

        let t = advance(&t.state, &UserEvent::Text("meh".into()), &mut env).unwrap();
        let t = advance(&t.state, &UserEvent::Text("actually fine".into()), &mut env).unwrap();
        let t = advance(&t.state, &rate(4), &mut env).unwrap();
        assert_eq!(env.opinions[1].revised_text, "actually fine");
        assert_eq!(t.state.step, Step::Done);
        assert_eq!(t.messages.last().unwrap().expects, InputMode::Closed);
    }

    #[test]
    fn empty_selection_is_done() {
        let mut env = FakeEnv::default();
        let (s, msgs) = start_selection(&user(), vec![], &mut env, 0);
        assert_eq!(s.step, Step::Done);
        assert_eq!(msgs.len(), 1);
    }

    #[test]
    fn inconsistent_state_is_an_error() {
        let mut env = FakeEnv::default();
        let mut s = generation_state(&mut env);
        s.phase = PhaseKind::Selection;
        assert!(advance(&s, &UserEvent::PauseButton, &mut env).is_err());
        let mut s = generation_state(&mut env);
        s.step = Step::AwaitSelfRating;
        assert!(advance(&s, &rate(3), &mut env).is_err());
    }

    #[test]
    fn intros() {
        let t = Templates::default();
        let m = phase_intro(PhaseKind::Generation, "Design better masks", 0, vec![], &t);
        assert!(m[0].text.contains("Design better masks"));
        assert!(m[0].text.contains("as many ideas as possible"));
        let m = phase_intro(PhaseKind::Selection, "g", 311, vec![], &t);
        assert!(m[0].text.contains("311"));
        let selected = vec![SelectedIdea {
            rank: 1,
            idea: IdeaId(0),
            text: "x".into(),
            mean: 6.0,
            n: 3,
            exemplars: OthersOpinions {
                support: vec!["great".into()],
                neutral: vec!["ok".into()],
                against: vec!["no".into()],
            },
        }];
        let m = phase_intro(PhaseKind::Post, "g", 0, selected.clone(), &t);
        match &m[0].content {
            MessageContent::Intro { selected: s, .. } => assert_eq!(s, &selected),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dissimilar_opinions_one_per_category() {
        let rec = |author: &str, text: &str, rating: i64| {
            OpinionRecord::new(
                IdeaId(0),
                CollaboratorId::new(author),
                text.into(),
                text.into(),
                Likert7::new(rating).unwrap(),
                0,
            )
        };
        let records = vec![
            rec("a", "great idea for comfort", 7),
            rec("b", "cheap and simple", 6),
            rec("c", "not sure", 4),
            rec("d", "too expensive", 2),
            rec("u1", "my own view", 1),
        ];
        let got = most_dissimilar_opinions(
            &ReferenceProvider,
            &user(),
            IdeaId(0),
            "great idea",
            &records,
        );
        assert_eq!(got.support, vec!["cheap and simple".to_string()]);
        assert_eq!(got.neutral, vec!["not sure".to_string()]);
        assert_eq!(got.against, vec!["too expensive".to_string()]);
        assert!(
            most_dissimilar_opinions(&ReferenceProvider, &user(), IdeaId(9), "x", &records)
                .is_empty()
        );
    }
}
