//! Simulated collaborators and reward environments.
//!
//! Every run is a pure function of its inputs and a `u64` seed.

pub mod end_to_end;
pub mod generation;
pub mod selection;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use end_to_end::{run_end_to_end, EndToEnd, SimUser};
pub use generation::{
    run_generation_sim, GenerationTrace, GenerationTrial, RewardSchedule, Segment,
};
pub use selection::{run_selection_sim, SelectionFixture, SelectionTrace, SelectionTrial, SimIdea};

use crate::orchestrator::{EngineError, EventConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

/// A runnable simulation, as stored in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Generation {
        trials: usize,
        schedule: RewardSchedule,
    },
    Selection {
        trials: usize,
        fixture: SelectionFixture,
    },
    EndToEnd {
        users: usize,
        config: Box<EventConfig>,
    },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| SimError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Output of any scenario: JSON records, one per line, plus an optional
/// CSV rendering for plotting.
#[derive(Debug, Clone, PartialEq)]
pub enum SimOutput {
    Generation(GenerationTrace),
    Selection(SelectionTrace),
    EndToEnd(EndToEnd),
}

impl SimOutput {
    pub fn json_lines(&self) -> Vec<String> {
        fn lines<T: Serialize>(items: &[T]) -> Vec<String> {
            items
                .iter()
                .map(|t| serde_json::to_string(t).expect("trace records serialize"))
                .collect()
        }
        match self {
            SimOutput::Generation(t) => lines(&t.trials),
            SimOutput::Selection(t) => lines(&t.trials),
            SimOutput::EndToEnd(e) => lines(&e.log),
        }
    }

    pub fn csv(&self) -> Option<String> {
        match self {
            SimOutput::Generation(t) => Some(t.to_csv()),
            SimOutput::Selection(t) => Some(t.to_csv()),
            SimOutput::EndToEnd(_) => None,
        }
    }
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<SimOutput, SimError> {
    Ok(match scenario {
        Scenario::Generation { trials, schedule } => {
            SimOutput::Generation(run_generation_sim(schedule, *trials, seed)?)
        }
        Scenario::Selection { trials, fixture } => {
            SimOutput::Selection(run_selection_sim(fixture, *trials, seed)?)
        }
        Scenario::EndToEnd { users, config } => {
            SimOutput::EndToEnd(run_end_to_end((**config).clone(), *users, seed)?)
        }
    })
}

/// Index of the largest count; ties go to the lower index.
pub fn modal(counts: &[usize]) -> Option<usize> {
    counts
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (i, &c)| match best {
            Some((_, b)) if b >= c => best,
            _ => Some((i, c)),
        })
        .map(|(i, _)| i)
}
