//! Upper-confidence-bound bandit with a growable action set.
//!
//! An arm's upper bound is `q + c * sqrt(ln t / n)`, where `q` is the running
//! mean reward of the arm, `n` its trial count and `t` the trial count over
//! all arms. Untried arms are served first, in creation order.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Likert7;

pub const DEFAULT_EXPLORATION: f64 = 2.0;

/// Reward credited to a generation arm when the user asks for different
/// inspirations instead of answering.
pub const REQUESTED_DIFFERENT_REWARD: f64 = 1.0;

/// Standard error assigned to an idea with a single rating: the largest
/// standard error two 1-7 ratings can produce (`{1, 7}`).
pub const SINGLE_RATING_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub String);

impl ActionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("the bandit has no arms")]
    NoArms,
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("action {0} already exists")]
    DuplicateAction(ActionId),
    #[error("reward {0} is not a finite number")]
    InvalidReward(f64),
    #[error("exploration constant must be positive, got {0}")]
    InvalidExploration(f64),
    #[error("no ratings to compute a standard error from")]
    EmptyRatings,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pub n: u64,
    pub mean: f64,
    pub q: f64,
}

impl ArmStats {
    pub fn is_untried(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward(f64);

impl Reward {
    pub fn new(value: f64) -> Result<Self, BanditError> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(BanditError::InvalidReward(value))
        }
    }

    pub fn from_rating(rating: Likert7) -> Self {
        Self(rating.as_f64())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    arms: IndexMap<ActionId, ArmStats>,
    t: u64,
    c: f64,
}

impl Default for BanditState {
    fn default() -> Self {
        Self {
            arms: IndexMap::new(),
            t: 0,
            c: DEFAULT_EXPLORATION,
        }
    }
}

impl BanditState {
    pub fn new(c: f64) -> Result<Self, BanditError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(BanditError::InvalidExploration(c));
        }
        Ok(Self {
            arms: IndexMap::new(),
            t: 0,
            c,
        })
    }

    pub fn with_arms<I, A>(c: f64, arms: I) -> Result<Self, BanditError>
    where
        I: IntoIterator<Item = A>,
        A: Into<ActionId>,
    {
        let mut state = Self::new(c)?;
        for arm in arms {
            state.add_arm(arm.into())?;
        }
        Ok(state)
    }

    pub fn exploration(&self) -> f64 {
        self.c
    }

    pub fn total_trials(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arm(&self, action: &ActionId) -> Option<&ArmStats> {
        self.arms.get(action)
    }

    /// Arms in creation order.
    pub fn arms(&self) -> impl Iterator<Item = (&ActionId, &ArmStats)> {
        self.arms.iter()
    }

    pub fn contains(&self, action: &ActionId) -> bool {
        self.arms.contains_key(action)
    }

    pub fn add_arm(&mut self, action: ActionId) -> Result<(), BanditError> {
        if self.arms.contains_key(&action) {
            return Err(BanditError::DuplicateAction(action));
        }
        self.arms.insert(action, ArmStats::default());
        Ok(())
    }

    /// Exploration bonus `c * sqrt(ln t / n)` for a tried arm.
    pub fn uncertainty(&self, stats: &ArmStats) -> f64 {
        debug_assert!(stats.n > 0);
        self.c * ((self.t as f64).ln() / stats.n as f64).sqrt()
    }

    /// Upper confidence bound of a tried arm; `None` while untried.
    pub fn upper_bound(&self, stats: &ArmStats) -> Option<f64> {
        (stats.n > 0).then(|| stats.q + self.uncertainty(stats))
    }

    pub fn select_action(&self) -> Result<ActionId, BanditError> {
        self.select_action_where(|_| true)?
            .ok_or(BanditError::NoArms)
    }

    /// Best arm among those accepted by `eligible`, without touching the
    /// statistics of the skipped ones. `Ok(None)` means every arm was
    /// skipped.
    pub fn select_action_where<F>(&self, mut eligible: F) -> Result<Option<ActionId>, BanditError>
    where
        F: FnMut(&ActionId) -> bool,
    {
        if self.arms.is_empty() {
            return Err(BanditError::NoArms);
        }
        let mut best: Option<(&ActionId, f64)> = None;
        for (action, stats) in &self.arms {
            if !eligible(action) {
                continue;
            }
            let Some(bound) = self.upper_bound(stats) else {
                return Ok(Some(action.clone()));
            };
            // strict comparison keeps the earliest arm on ties
            if best.is_none_or(|(_, b)| bound > b) {
                best = Some((action, bound));
            }
        }
        Ok(best.map(|(a, _)| a.clone()))
    }

    /// `q <- m + (r - m) / N` with `m` the mean before this reward and `N`
    /// the count after it, which keeps `q` equal to the running average.
    pub fn update(&mut self, action: &ActionId, reward: Reward) -> Result<ArmStats, BanditError> {
        let stats = self
            .arms
            .get_mut(action)
            .ok_or_else(|| BanditError::UnknownAction(action.clone()))?;
        let prior_mean = stats.mean;
        stats.n += 1;
        stats.q = prior_mean + (reward.value() - prior_mean) / stats.n as f64;
        stats.mean = stats.q;
        self.t += 1;
        Ok(*stats)
    }
}

/// Standard error of a set of ratings: sample standard deviation (n - 1
/// divisor) over `sqrt(n)`. A single rating yields [`SINGLE_RATING_SE`].
pub fn standard_error(ratings: &[Likert7]) -> Result<f64, BanditError> {
    match ratings.len() {
        0 => Err(BanditError::EmptyRatings),
        1 => Ok(SINGLE_RATING_SE),
        n => {
            let n_f = n as f64;
            // summed in ascending order
            let mut values: Vec<f64> = ratings.iter().map(|r| r.as_f64()).collect();
            values.sort_by(f64::total_cmp);
            let mean = values.iter().sum::<f64>() / n_f;
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            Ok((ss / (n_f - 1.0)).sqrt() / n_f.sqrt())
        }
    }
}

/// Reward for serving an idea during selection: the standard error of all of
/// its ratings, including the one just submitted.
pub fn selection_reward(ratings: &[Likert7]) -> Result<Reward, BanditError> {
    standard_error(ratings).map(Reward)
}
