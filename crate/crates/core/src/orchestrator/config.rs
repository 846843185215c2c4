use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::DEFAULT_EXPLORATION;
use crate::domain::{IdeationGoal, PhaseKind, PhaseSpan, Timestamp, DEFAULT_MAX_TEXT_CHARS};
use crate::policies::PolicyKind;
use crate::scoring::DEFAULT_SE_PENALTY;
use crate::similarity::SimilarityThresholds;

use super::EngineError;

pub const DAY_MS: u64 = 24 * 60 * 60 * 1000;

fn default_phases() -> Vec<PhaseSpan> {
    vec![
        PhaseSpan {
            kind: PhaseKind::Generation,
            days: 2,
        },
        PhaseSpan {
            kind: PhaseKind::Selection,
            days: 2,
        },
        PhaseSpan {
            kind: PhaseKind::Post,
            days: 1,
        },
    ]
}

fn default_exploration() -> f64 {
    DEFAULT_EXPLORATION
}

fn default_penalty() -> f64 {
    DEFAULT_SE_PENALTY
}

fn default_k() -> usize {
    3
}

fn default_top_n() -> usize {
    3
}

fn default_max_chars() -> usize {
    DEFAULT_MAX_TEXT_CHARS
}

fn default_day_length() -> u64 {
    DAY_MS
}

fn default_true() -> bool {
    true
}

fn default_timeout_ms() -> u64 {
    2000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteSimilarity {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    #[serde(default)]
    pub alias: Option<String>,
}

/// Everything that parameterizes one ideation event. Loaded from TOML; every
/// key except `event_id`, `goal` and `policy` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    pub event_id: String,
    pub goal: String,
    pub policy: PolicyKind,
    #[serde(default = "default_phases")]
    pub phases: Vec<PhaseSpan>,
    #[serde(default)]
    pub thresholds: SimilarityThresholds,
    /// Weight of the standard error in the grand score.
    #[serde(default = "default_penalty")]
    pub se_penalty: f64,
    /// UCB exploration constant.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    /// Inspirations shown per prompt.
    #[serde(default = "default_k")]
    pub inspirations: usize,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub seed_ideas: Vec<String>,
    /// One generation bandit for the whole group instead of one per user.
    #[serde(default)]
    pub shared_generation_bandit: bool,
    #[serde(default = "default_max_chars")]
    pub max_text_chars: usize,
    #[serde(default = "default_day_length")]
    pub day_length_ms: u64,
    /// Close phases automatically when their scheduled days run out.
    #[serde(default = "default_true")]
    pub auto_advance: bool,
    #[serde(default)]
    pub starts_at: Option<Timestamp>,
    #[serde(default)]
    pub similarity: Option<RemoteSimilarity>,
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
    #[serde(default)]
    pub roster: Vec<RosterEntry>,
}

impl EventConfig {
    /// A config with every default applied.
    pub fn new(event_id: impl Into<String>, goal: impl Into<String>, policy: PolicyKind) -> Self {
        Self {
            event_id: event_id.into(),
            goal: goal.into(),
            policy,
            phases: default_phases(),
            thresholds: SimilarityThresholds::default(),
            se_penalty: DEFAULT_SE_PENALTY,
            exploration: DEFAULT_EXPLORATION,
            inspirations: default_k(),
            top_n: default_top_n(),
            seed_ideas: Vec::new(),
            shared_generation_bandit: false,
            max_text_chars: DEFAULT_MAX_TEXT_CHARS,
            day_length_ms: DAY_MS,
            auto_advance: true,
            starts_at: None,
            similarity: None,
            templates: BTreeMap::new(),
            roster: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        let config: EventConfig =
            toml::from_str(text).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn goal(&self) -> IdeationGoal {
        IdeationGoal {
            text: self.goal.clone(),
            phase_schedule: self.phases.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let invalid = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.event_id.is_empty()
            || !self
                .event_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return invalid(format!(
                "event_id {:?} must be non-empty letters, digits, '-' or '_'",
                self.event_id
            ));
        }
        self.goal()
            .validate()
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.thresholds
            .validate()
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        if !(self.exploration.is_finite() && self.exploration > 0.0) {
            return invalid(format!(
                "exploration must be positive, got {}",
                self.exploration
            ));
        }
        if !(self.se_penalty.is_finite() && self.se_penalty >= 0.0) {
            return invalid(format!(
                "se_penalty must be non-negative, got {}",
                self.se_penalty
            ));
        }
        if self.inspirations == 0 || self.top_n == 0 {
            return invalid("inspirations and top_n must be at least 1".into());
        }
        if self.day_length_ms == 0 || self.max_text_chars == 0 {
            return invalid("day_length_ms and max_text_chars must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.roster {
            if !seen.insert(entry.id.as_str()) {
                return invalid(format!("duplicate roster id {}", entry.id));
            }
            if entry.alias.as_deref() == Some(entry.id.as_str()) {
                return invalid(format!("alias of {} must not reveal the id", entry.id));
            }
        }
        Ok(())
    }
}
