use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bandit::{ActionId, Reward};
use crate::policies::{generation_bandit, GenerationArm};

use super::SimError;

pub const MAX_TRIALS: usize = 200;

/// Mean reward of an arm over the trials `from..=to` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub mean: f64,
}

/// Per-arm piecewise-constant mean rewards, in the order of
/// [`GenerationArm::ALL`]. Observed rewards add Gaussian noise and are
/// clamped to the rating scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSchedule {
    pub noise_sd: f64,
    pub arms: Vec<Vec<Segment>>,
}

impl RewardSchedule {
    pub fn constant(mean: f64, noise_sd: f64) -> Self {
        let flat = vec![Segment {
            from: 1,
            to: MAX_TRIALS,
            mean,
        }];
        Self {
            noise_sd,
            arms: vec![flat; GenerationArm::ALL.len()],
        }
    }

    pub fn validate(&self, trials: usize) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        if self.arms.len() != GenerationArm::ALL.len() {
            return invalid(format!(
                "expected {} arms, got {}",
                GenerationArm::ALL.len(),
                self.arms.len()
            ));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return invalid("noise_sd must be non-negative".into());
        }
        for (i, arm) in self.arms.iter().enumerate() {
            for t in 1..=trials {
                let hits = arm.iter().filter(|s| s.from <= t && t <= s.to).count();
                if hits != 1 {
                    return invalid(format!(
                        "arm {} has {hits} segments covering trial {t}",
                        i + 1
                    ));
                }
            }
            if arm.iter().any(|s| !(1.0..=7.0).contains(&s.mean)) {
                return invalid(format!("arm {} has a mean outside 1..=7", i + 1));
            }
        }
        Ok(())
    }

    pub fn mean(&self, arm: usize, trial: usize) -> f64 {
        self.arms[arm]
            .iter()
            .find(|s| s.from <= trial && trial <= s.to)
            .map(|s| s.mean)
            .expect("validated schedule covers every trial")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrial {
    pub trial: usize,
    pub arm: ActionId,
    /// Position of `arm` in the schedule, from 0.
    pub arm_index: usize,
    pub reward: f64,
    /// Estimate and exploration bonus of the chosen arm after the update.
    pub q: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub seed: u64,
    pub trials: Vec<GenerationTrial>,
    /// Picks of each arm in trials 1-10, 11-20, and so on.
    pub windows: Vec<Vec<usize>>,
}

impl GenerationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,arm,arm_index,reward,q,uncertainty\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.trial, t.arm, t.arm_index, t.reward, t.q, t.uncertainty
            ));
        }
        out
    }
}

pub fn run_generation_sim(
    schedule: &RewardSchedule,
    trials: usize,
    seed: u64,
) -> Result<GenerationTrace, SimError> {
    if trials > MAX_TRIALS {
        return Err(SimError::Invalid(format!("at most {MAX_TRIALS} trials")));
    }
    schedule.validate(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        Normal::new(0.0, schedule.noise_sd).map_err(|e| SimError::Invalid(e.to_string()))?;
    let mut bandit = generation_bandit(crate::bandit::DEFAULT_EXPLORATION)
        .expect("default exploration is valid");
    let mut out = Vec::with_capacity(trials);
    let mut windows = Vec::new();
    for trial in 1..=trials {
        let arm = bandit.select_action().expect("four arms");
        let arm_index = bandit
            .arms()
            .position(|(a, _)| *a == arm)
            .expect("selected arm exists");
        let raw = schedule.mean(arm_index, trial) + noise.sample(&mut rng);
        let reward = raw.clamp(1.0, 7.0);
        let stats = bandit
            .update(&arm, Reward::new(reward).expect("finite"))
            .expect("known arm");
        if (trial - 1) % 10 == 0 {
            windows.push(vec![0; schedule.arms.len()]);
        }
        windows.last_mut().expect("window opened")[arm_index] += 1;
        out.push(GenerationTrial {
            trial,
            arm,
            arm_index,
            reward,
            q: stats.q,
            uncertainty: bandit.uncertainty(&stats),
        });
    }
    Ok(GenerationTrace {
        seed,
        trials: out,
        windows,
    })
}
