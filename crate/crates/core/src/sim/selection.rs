use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CollaboratorId, Idea, IdeaId, Likert7, OpinionRecord};
use crate::policies::{PolicyKind, SelectionPolicy};

use super::SimError;

/// One idea of the selection environment. Reviewers draw their rating
/// uniformly from `responses`; `history` holds ratings given before the
/// simulation starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimIdea {
    pub id: u64,
    pub self_rating: Likert7,
    pub history: Vec<Likert7>,
    pub responses: Vec<Likert7>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFixture {
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    pub ideas: Vec<SimIdea>,
}

fn default_exploration() -> f64 {
    crate::bandit::DEFAULT_EXPLORATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrial {
    pub trial: usize,
    pub idea: IdeaId,
    pub rating: Likert7,
    pub reward: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub seed: u64,
    /// Trials spent serving every idea once.
    pub warm_up: usize,
    pub trials: Vec<SelectionTrial>,
    /// First trial after the warm-up that served each idea, counted from 1.
    pub first_serve_after_warm_up: BTreeMap<IdeaId, usize>,
}

impl SelectionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,idea,rating,reward,q\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.trial,
                t.idea.0,
                t.rating.value(),
                t.reward,
                t.q
            ));
        }
        out
    }
}

/// Serves ideas through the adaptive selection policy, one fresh reviewer
/// per trial.
pub fn run_selection_sim(
    fixture: &SelectionFixture,
    trials: usize,
    seed: u64,
) -> Result<SelectionTrace, SimError> {
    if fixture.ideas.len() < 10 {
        return Err(SimError::Invalid(
            "the selection environment needs at least 10 ideas".into(),
        ));
    }
    if fixture.ideas.iter().any(|i| i.responses.is_empty()) {
        return Err(SimError::Invalid(
            "every idea needs at least one response".into(),
        ));
    }
    let author = CollaboratorId::new("sim-author");
    let ideas: Vec<Idea> = fixture
        .ideas
        .iter()
        .map(|s| Idea {
            id: IdeaId(s.id),
            author: author.clone(),
            text: format!("simulated idea {}", s.id),
            self_rating: Some(s.self_rating),
            created_at: 0,
            notable: true,
            too_similar_to: None,
            phase_day: 1,
        })
        .collect();
    let mut policy = SelectionPolicy::start(PolicyKind::Adaptive, &ideas, fixture.exploration)
        .map_err(|e| SimError::Invalid(e.to_string()))?;
    let mut ratings: BTreeMap<IdeaId, Vec<Likert7>> = fixture
        .ideas
        .iter()
        .map(|s| (IdeaId(s.id), s.history.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warm_up = ideas.len();
    let mut out = Vec::with_capacity(trials);
    let mut first = BTreeMap::new();
    let no_opinions: [OpinionRecord; 0] = [];
    for trial in 1..=trials {
        let reviewer = CollaboratorId::new(format!("sim-reviewer-{trial}"));
        let Some(idea) = policy.next_for(&reviewer, &ideas, &no_opinions) else {
            break;
        };
        let sim_idea = fixture
            .ideas
            .iter()
            .find(|s| IdeaId(s.id) == idea)
            .expect("served idea is in the fixture");
        let rating = sim_idea.responses[rng.random_range(0..sim_idea.responses.len())];
        let history = ratings.get_mut(&idea).expect("every idea has a history");
        history.push(rating);
        let delta = policy
            .record_rating(idea, history)
            .map_err(|e| SimError::Invalid(e.to_string()))?
            .expect("adaptive policy reports deltas");
        if trial > warm_up {
            first.entry(idea).or_insert(trial - warm_up);
        }
        out.push(SelectionTrial {
            trial,
            idea,
            rating,
            reward: delta.reward,
            q: delta.after.q,
        });
    }
    Ok(SelectionTrace {
        seed,
        warm_up,
        trials: out,
        first_serve_after_warm_up: first,
    })
}
