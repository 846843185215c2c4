use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conversation::{Step, UserEvent};
use crate::domain::{CollaboratorId, Likert7, Timestamp};
use crate::orchestrator::{EventConfig, IdeationEngine, LogEntry, RosterEntry, ScoreReport};
use crate::similarity::ReferenceProvider;

use super::SimError;

const MINUTE: u64 = 60 * 1000;

const ADJECTIVES: [&str; 6] = [
    "washable",
    "transparent",
    "foldable",
    "scented",
    "cooling",
    "glowing",
];
const ITEMS: [&str; 4] = ["mask", "face shield", "respirator", "neck gaiter"];
const FEATURES: [&str; 6] = [
    "a copper filter",
    "a voice amplifier",
    "an anti fog coating",
    "adjustable straps",
    "a pocket for tissues",
    "a built in fan",
];
const SUPPORT: [&str; 3] = [
    "I would wear this every day",
    "this solves a real problem for me",
    "simple and practical",
];
const NEUTRAL: [&str; 2] = [
    "not sure it is worth the cost",
    "could work for some people",
];
const AGAINST: [&str; 3] = [
    "too complicated to clean",
    "I doubt anyone would buy it",
    "it looks uncomfortable",
];

/// Behaviour of one simulated collaborator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimUser {
    pub id: CollaboratorId,
    pub ideas: usize,
    /// Added to every rating before clamping.
    pub rating_bias: i64,
    pub show_other_prob: f64,
    pub pause_prob: f64,
    /// Chance of resubmitting someone else's idea nearly verbatim.
    pub copy_prob: f64,
    /// Chance of pressing a button that is not offered.
    pub misclick_prob: f64,
}

impl SimUser {
    fn sample(index: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            id: CollaboratorId::new(format!("sim-{:02}", index + 1)),
            ideas: rng.random_range(2..=4),
            rating_bias: rng.random_range(-1..=1),
            show_other_prob: 0.15,
            pause_prob: 0.05,
            copy_prob: 0.1,
            misclick_prob: 0.03,
        }
    }

    fn rating(&self, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Likert7 {
        let v = (rng.random_range(lo..=hi) + self.rating_bias).clamp(1, 7);
        Likert7::new(v).expect("clamped to the scale")
    }
}

fn idea_text(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {} with {}",
        ADJECTIVES.choose(rng).expect("non-empty"),
        ITEMS.choose(rng).expect("non-empty"),
        FEATURES.choose(rng).expect("non-empty"),
    )
}

fn opinion_text(rng: &mut ChaCha8Rng, rating: i64) -> String {
    let pool: &[&str] = match rating {
        1..=3 => &AGAINST,
        4 => &NEUTRAL,
        _ => &SUPPORT,
    };
    pool.choose(rng).expect("non-empty").to_string()
}

/// Log, final report and state snapshot of a simulated event.
#[derive(Debug, Clone, PartialEq)]
pub struct EndToEnd {
    pub users: Vec<SimUser>,
    pub log: Vec<LogEntry>,
    pub report: ScoreReport,
    pub snapshot: String,
}

struct Driver {
    engine: IdeationEngine,
    rng: ChaCha8Rng,
    now: Timestamp,
}

impl Driver {
    fn send(&mut self, user: &CollaboratorId, event: UserEvent) -> Result<(), SimError> {
        self.now += self.rng.random_range(1..=30) * MINUTE;
        self.engine.handle_incoming(user, event, self.now)?;
        Ok(())
    }

    fn step(&self, user: &CollaboratorId) -> Step {
        self.engine
            .conversation(user)
            .expect("enrolled")
            .step
            .clone()
    }

    /// One action of `user`; returns false once the user has nothing left to do.
    fn act_generation(&mut self, user: &SimUser, remaining: &mut usize) -> Result<bool, SimError> {
        let event = match self.step(&user.id) {
            Step::Paused(_) => UserEvent::ResumeButton,
            _ if self.rng.random_bool(user.misclick_prob) => UserEvent::KeepInitialOpinion,
            _ if self.rng.random_bool(user.pause_prob) => UserEvent::PauseButton,
            Step::AwaitIdea if *remaining == 0 => return Ok(false),
            Step::AwaitIdea if self.rng.random_bool(user.show_other_prob) => {
                UserEvent::ShowOtherIdeas
            }
            Step::AwaitIdea => {
                let others: Vec<String> = self
                    .engine
                    .core()
                    .ideas
                    .iter()
                    .filter(|i| i.author != user.id)
                    .map(|i| i.text.clone())
                    .collect();
                let text = match others.choose(&mut self.rng) {
                    Some(t) if self.rng.random_bool(user.copy_prob) => format!("{t}!"),
                    _ => idea_text(&mut self.rng),
                };
                UserEvent::Text(text)
            }
            Step::AwaitSelfRating => {
                *remaining -= 1;
                UserEvent::RateButton(user.rating(&mut self.rng, 3, 7))
            }
            other => {
                return Err(SimError::Invalid(format!(
                    "unexpected generation step {other:?}"
                )))
            }
        };
        self.send(&user.id, event)?;
        Ok(true)
    }

    fn act_selection(&mut self, user: &SimUser) -> Result<bool, SimError> {
        let event = match self.step(&user.id) {
            Step::Done => return Ok(false),
            Step::Paused(_) => UserEvent::ResumeButton,
            _ if self.rng.random_bool(user.misclick_prob) => UserEvent::ShowOtherIdeas,
            _ if self.rng.random_bool(user.pause_prob) => UserEvent::PauseButton,
            Step::AwaitInitialOpinion => {
                let leaning = self.rng.random_range(1..=7);
                UserEvent::Text(opinion_text(&mut self.rng, leaning))
            }
            Step::AwaitReevaluation if self.rng.random_bool(0.5) => UserEvent::KeepInitialOpinion,
            Step::AwaitReevaluation => {
                let leaning = self.rng.random_range(1..=7);
                UserEvent::Text(format!(
                    "on reflection, {}",
                    opinion_text(&mut self.rng, leaning)
                ))
            }
            Step::AwaitIdeaRating => UserEvent::RateButton(user.rating(&mut self.rng, 1, 7)),
            other => {
                return Err(SimError::Invalid(format!(
                    "unexpected selection step {other:?}"
                )))
            }
        };
        self.send(&user.id, event)?;
        Ok(true)
    }
}

/// Runs a complete event with `n_users` simulated collaborators through the
/// engine, advancing phases as an administrator would. The config's roster,
/// start time and similarity service are replaced.
pub fn run_end_to_end(
    mut config: EventConfig,
    n_users: usize,
    seed: u64,
) -> Result<EndToEnd, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<SimUser> = (0..n_users).map(|i| SimUser::sample(i, &mut rng)).collect();
    config.roster = users
        .iter()
        .map(|u| RosterEntry {
            id: u.id.0.clone(),
            alias: None,
        })
        .collect();
    config.starts_at = Some(0);
    config.auto_advance = false;
    config.similarity = None;
    let engine = IdeationEngine::create(config, 0, Arc::new(ReferenceProvider))?;
    let mut d = Driver {
        engine,
        rng,
        now: 0,
    };

    let mut remaining: Vec<usize> = users.iter().map(|u| u.ideas).collect();
    let mut active: Vec<usize> = (0..users.len()).collect();
    while !active.is_empty() {
        let pick = d.rng.random_range(0..active.len());
        let u = active[pick];
        if !d.act_generation(&users[u], &mut remaining[u])? {
            active.swap_remove(pick);
        }
    }
    d.now += MINUTE;
    d.engine.advance_phase(d.now)?;

    let mut active: Vec<usize> = (0..users.len()).collect();
    while !active.is_empty() {
        let pick = d.rng.random_range(0..active.len());
        if !d.act_selection(&users[active[pick]])? {
            active.swap_remove(pick);
        }
    }
    d.now += MINUTE;
    d.engine.advance_phase(d.now)?;

    Ok(EndToEnd {
        users,
        log: d.engine.log().to_vec(),
        report: d.engine.report(),
        snapshot: d.engine.snapshot_json(),
    })
}
