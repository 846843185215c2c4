//! Facilitation strategies.
//!
//! The structured facilitator diversifies first (dissimilar inspirations,
//! propose anything) and improves afterwards (similar inspirations, improve
//! one of them), and reviews ideas in descending self-rating order. The
//! adaptive facilitator lets a bandit pick the inspiration/method pair from
//! each user's own ratings, and serves for review the idea whose group
//! ratings are most uncertain.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{
    selection_reward, ActionId, ArmStats, BanditError, BanditState, Reward,
    REQUESTED_DIFFERENT_REWARD,
};
use crate::domain::{CollaboratorId, Idea, IdeaId, Likert7, OpinionRecord};
use crate::similarity::{top_k, InspirationMode, SimilarityProvider, SimilarityThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Structured,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdeationMethod {
    AnyIdea,
    ImproveIdea,
}

/// One inspiration/method combination offered during generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenerationArm {
    pub mode: InspirationMode,
    pub method: IdeationMethod,
}

impl GenerationArm {
    /// The four adaptive arms, in cold-start order.
    pub const ALL: [GenerationArm; 4] = [
        GenerationArm::new(InspirationMode::Similar, IdeationMethod::AnyIdea),
        GenerationArm::new(InspirationMode::Similar, IdeationMethod::ImproveIdea),
        GenerationArm::new(InspirationMode::Dissimilar, IdeationMethod::AnyIdea),
        GenerationArm::new(InspirationMode::Dissimilar, IdeationMethod::ImproveIdea),
    ];

    pub const fn new(mode: InspirationMode, method: IdeationMethod) -> Self {
        Self { mode, method }
    }

    pub fn action_id(self) -> ActionId {
        let mode = match self.mode {
            InspirationMode::Similar => "similar",
            InspirationMode::Dissimilar => "dissimilar",
        };
        let method = match self.method {
            IdeationMethod::AnyIdea => "any",
            IdeationMethod::ImproveIdea => "improve",
        };
        ActionId::new(format!("{mode}_{method}"))
    }

    pub fn from_action_id(id: &ActionId) -> Option<Self> {
        Self::ALL.into_iter().find(|arm| &arm.action_id() == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptId(pub u64);

/// An idea shown as inspiration. Seed inspirations have no idea id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inspiration {
    pub idea: Option<IdeaId>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPrompt {
    pub id: PromptId,
    pub mode: InspirationMode,
    pub method: IdeationMethod,
    pub inspirations: Vec<Inspiration>,
}

impl GenerationPrompt {
    pub fn arm(&self) -> GenerationArm {
        GenerationArm::new(self.mode, self.method)
    }
}

/// Where inspirations come from.
pub struct InspirationSource<'a> {
    pub provider: &'a dyn SimilarityProvider,
    pub thresholds: &'a SimilarityThresholds,
    pub k: usize,
    pub seeds: &'a [String],
}

impl InspirationSource<'_> {
    fn seed_inspirations(&self) -> Vec<Inspiration> {
        self.seeds
            .iter()
            .take(self.k)
            .map(|text| Inspiration {
                idea: None,
                text: text.clone(),
            })
            .collect()
    }

    /// Top-k ideas of other people relative to `latest`, or the seeds when
    /// the user has no idea yet or nobody else has anything to show.
    pub fn gather(
        &self,
        user: &CollaboratorId,
        latest: Option<&Idea>,
        pool: &[Idea],
        mode: InspirationMode,
    ) -> Vec<Inspiration> {
        let Some(latest) = latest else {
            return self.seed_inspirations();
        };
        let found = top_k(
            self.provider,
            self.thresholds,
            &latest.text,
            pool,
            self.k,
            mode,
            user,
        );
        if found.is_empty() {
            return self.seed_inspirations();
        }
        found
            .into_iter()
            .map(|idea| Inspiration {
                idea: Some(idea.id),
                text: idea.text.clone(),
            })
            .collect()
    }
}

/// Number of leading generation days spent diversifying. Odd counts give the
/// extra day to diversification.
pub fn diversify_days(generation_days: u32) -> u32 {
    generation_days.div_ceil(2).max(1)
}

pub fn structured_arm(day: u32, generation_days: u32) -> GenerationArm {
    if day <= diversify_days(generation_days) {
        GenerationArm::new(InspirationMode::Dissimilar, IdeationMethod::AnyIdea)
    } else {
        GenerationArm::new(InspirationMode::Similar, IdeationMethod::ImproveIdea)
    }
}

pub fn structured_generation_prompt(
    id: PromptId,
    day: u32,
    generation_days: u32,
    user: &CollaboratorId,
    latest: Option<&Idea>,
    pool: &[Idea],
    source: &InspirationSource<'_>,
) -> GenerationPrompt {
    let arm = structured_arm(day, generation_days);
    GenerationPrompt {
        id,
        mode: arm.mode,
        method: arm.method,
        inspirations: source.gather(user, latest, pool, arm.mode),
    }
}

pub fn generation_bandit(c: f64) -> Result<BanditState, BanditError> {
    BanditState::with_arms(c, GenerationArm::ALL.map(GenerationArm::action_id))
}

pub fn adaptive_generation_prompt(
    id: PromptId,
    bandit: &BanditState,
    user: &CollaboratorId,
    latest: Option<&Idea>,
    pool: &[Idea],
    source: &InspirationSource<'_>,
) -> Result<GenerationPrompt, PolicyError> {
    let action = bandit.select_action()?;
    let arm = GenerationArm::from_action_id(&action).ok_or(PolicyError::ForeignArm(action))?;
    Ok(GenerationPrompt {
        id,
        mode: arm.mode,
        method: arm.method,
        inspirations: source.gather(user, latest, pool, arm.mode),
    })
}

/// Notable, self-rated ideas by descending self-rating; equal ratings keep
/// creation order.
pub fn structured_review_order(pool: &[Idea]) -> Vec<IdeaId> {
    let mut ideas: Vec<&Idea> = pool.iter().filter(|i| i.is_poolable()).collect();
    ideas.sort_by(|a, b| b.self_rating.cmp(&a.self_rating).then(a.id.cmp(&b.id)));
    ideas.into_iter().map(|i| i.id).collect()
}

pub fn idea_action(id: IdeaId) -> ActionId {
    ActionId::new(id.to_string())
}

pub fn action_idea(action: &ActionId) -> Option<IdeaId> {
    action
        .as_str()
        .strip_prefix("idea-")
        .and_then(|n| n.parse().ok())
        .map(IdeaId)
}

/// The arm with the best upper bound among ideas the reviewer neither wrote
/// nor already rated. Skipped arms are bypassed, not modified.
pub fn adaptive_next_review_idea(
    bandit: &BanditState,
    reviewer: &CollaboratorId,
    author_of: impl Fn(IdeaId) -> Option<CollaboratorId>,
    already_rated: &BTreeSet<IdeaId>,
) -> Result<IdeaId, PolicyError> {
    let chosen = match bandit.select_action_where(|action| {
        action_idea(action).is_some_and(|idea| {
            !already_rated.contains(&idea) && author_of(idea).as_ref() != Some(reviewer)
        })
    }) {
        Ok(chosen) => chosen,
        Err(BanditError::NoArms) => None,
        Err(e) => return Err(e.into()),
    };
    chosen
        .and_then(|a| action_idea(&a))
        .ok_or(PolicyError::Exhausted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenerationOutcome {
    IdeaRated(Likert7),
    RequestedDifferent,
}

impl GenerationOutcome {
    pub fn reward(self) -> Reward {
        match self {
            GenerationOutcome::IdeaRated(r) => Reward::from_rating(r),
            GenerationOutcome::RequestedDifferent => {
                Reward::new(REQUESTED_DIFFERENT_REWARD).expect("finite constant")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("prompt {0:?} is no longer the active prompt for this user")]
    StalePrompt(PromptId),
    #[error("the reviewer has rated every idea available to them")]
    Exhausted,
    #[error("bandit arm {0} does not belong to this policy")]
    ForeignArm(ActionId),
}

/// Which bandit a delta applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BanditScope {
    /// A user's generation bandit (or the shared one when `user` is `None`).
    Generation {
        user: Option<CollaboratorId>,
    },
    Selection,
}

/// One bandit update, recorded in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDelta {
    pub scope: BanditScope,
    pub action: ActionId,
    pub reward: f64,
    pub after: ArmStats,
    pub total_trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct ServedPrompt {
    id: PromptId,
    arm: GenerationArm,
    resolved: bool,
}

/// Generation-phase policy state for a whole ideation event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPolicy {
    kind: PolicyKind,
    exploration: f64,
    shared_bandit: bool,
    generation_days: u32,
    bandits: BTreeMap<CollaboratorId, BanditState>,
    shared: Option<BanditState>,
    served: BTreeMap<CollaboratorId, ServedPrompt>,
    next_prompt: u64,
}

impl GenerationPolicy {
    pub fn new(
        kind: PolicyKind,
        exploration: f64,
        shared_bandit: bool,
        generation_days: u32,
    ) -> Result<Self, PolicyError> {
        let shared = match (kind, shared_bandit) {
            (PolicyKind::Adaptive, true) => Some(generation_bandit(exploration)?),
            _ => {
                // validate the constant even when no shared bandit is built
                BanditState::new(exploration)?;
                None
            }
        };
        Ok(Self {
            kind,
            exploration,
            shared_bandit,
            generation_days,
            bandits: BTreeMap::new(),
            shared,
            served: BTreeMap::new(),
            next_prompt: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// The bandit that drives `user`'s prompts, if the policy is adaptive.
    pub fn bandit_for(&self, user: &CollaboratorId) -> Option<&BanditState> {
        match self.kind {
            PolicyKind::Structured => None,
            PolicyKind::Adaptive if self.shared_bandit => self.shared.as_ref(),
            PolicyKind::Adaptive => self.bandits.get(user),
        }
    }

    fn bandit_mut(&mut self, user: &CollaboratorId) -> Result<&mut BanditState, PolicyError> {
        if self.shared_bandit {
            return Ok(self
                .shared
                .as_mut()
                .expect("shared bandit built at construction"));
        }
        if !self.bandits.contains_key(user) {
            self.bandits
                .insert(user.clone(), generation_bandit(self.exploration)?);
        }
        Ok(self.bandits.get_mut(user).expect("inserted above"))
    }

    pub fn active_prompt(&self, user: &CollaboratorId) -> Option<PromptId> {
        self.served.get(user).filter(|p| !p.resolved).map(|p| p.id)
    }

    /// Builds and records the next prompt for `user`, superseding any
    /// earlier one.
    pub fn next_prompt(
        &mut self,
        user: &CollaboratorId,
        day: u32,
        latest: Option<&Idea>,
        pool: &[Idea],
        source: &InspirationSource<'_>,
    ) -> Result<GenerationPrompt, PolicyError> {
        let id = PromptId(self.next_prompt);
        let prompt = match self.kind {
            PolicyKind::Structured => structured_generation_prompt(
                id,
                day,
                self.generation_days,
                user,
                latest,
                pool,
                source,
            ),
            PolicyKind::Adaptive => {
                let bandit = self.bandit_mut(user)?;
                adaptive_generation_prompt(id, bandit, user, latest, pool, source)?
            }
        };
        self.next_prompt += 1;
        self.served.insert(
            user.clone(),
            ServedPrompt {
                id,
                arm: prompt.arm(),
                resolved: false,
            },
        );
        Ok(prompt)
    }

    /// Credits the outcome of the user's active prompt. Structured policies
    /// only validate the prompt; adaptive ones update the bandit.
    pub fn record_outcome(
        &mut self,
        user: &CollaboratorId,
        prompt: PromptId,
        outcome: GenerationOutcome,
    ) -> Result<Option<PolicyDelta>, PolicyError> {
        let served = match self.served.get(user) {
            Some(s) if s.id == prompt && !s.resolved => *s,
            _ => return Err(PolicyError::StalePrompt(prompt)),
        };
        let delta = match self.kind {
            PolicyKind::Structured => None,
            PolicyKind::Adaptive => {
                let shared = self.shared_bandit;
                let bandit = self.bandit_mut(user)?;
                let action = served.arm.action_id();
                let reward = outcome.reward();
                let after = bandit.update(&action, reward)?;
                Some(PolicyDelta {
                    scope: BanditScope::Generation {
                        user: (!shared).then(|| user.clone()),
                    },
                    action,
                    reward: reward.value(),
                    after,
                    total_trials: bandit.total_trials(),
                })
            }
        };
        if let Some(s) = self.served.get_mut(user) {
            s.resolved = true;
        }
        Ok(delta)
    }
}

/// Selection-phase policy state, built once the generation pool is frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectionPolicy {
    Structured { order: Vec<IdeaId> },
    Adaptive { bandit: BanditState },
}

impl SelectionPolicy {
    pub fn start(kind: PolicyKind, pool: &[Idea], exploration: f64) -> Result<Self, PolicyError> {
        Ok(match kind {
            PolicyKind::Structured => SelectionPolicy::Structured {
                order: structured_review_order(pool),
            },
            PolicyKind::Adaptive => {
                let mut bandit = BanditState::new(exploration)?;
                for idea in pool.iter().filter(|i| i.is_poolable()) {
                    bandit.add_arm(idea_action(idea.id))?;
                }
                SelectionPolicy::Adaptive { bandit }
            }
        })
    }

    /// Number of ideas up for review.
    pub fn len(&self) -> usize {
        match self {
            SelectionPolicy::Structured { order } => order.len(),
            SelectionPolicy::Adaptive { bandit } => bandit.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn next_for(
        &self,
        reviewer: &CollaboratorId,
        ideas: &[Idea],
        opinions: &[OpinionRecord],
    ) -> Option<IdeaId> {
        let rated: BTreeSet<IdeaId> = opinions
            .iter()
            .filter(|o| &o.author == reviewer)
            .map(|o| o.idea)
            .collect();
        let author_of = |id: IdeaId| ideas.iter().find(|i| i.id == id).map(|i| i.author.clone());
        match self {
            SelectionPolicy::Structured { order } => order
                .iter()
                .copied()
                .find(|id| !rated.contains(id) && author_of(*id).as_ref() != Some(reviewer)),
            SelectionPolicy::Adaptive { bandit } => {
                adaptive_next_review_idea(bandit, reviewer, author_of, &rated).ok()
            }
        }
    }

    /// Feeds the idea's full rating set (including the new rating) to the
    /// bandit when adaptive.
    pub fn record_rating(
        &mut self,
        idea: IdeaId,
        ratings: &[Likert7],
    ) -> Result<Option<PolicyDelta>, PolicyError> {
        match self {
            SelectionPolicy::Structured { .. } => Ok(None),
            SelectionPolicy::Adaptive { bandit } => {
                let reward = selection_reward(ratings)?;
                let action = idea_action(idea);
                let after = bandit.update(&action, reward)?;
                Ok(Some(PolicyDelta {
                    scope: BanditScope::Selection,
                    action,
                    reward: reward.value(),
                    after,
                    total_trials: bandit.total_trials(),
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::ReferenceProvider;

    fn r(v: i64) -> Likert7 {
        Likert7::new(v).unwrap()
    }

    fn idea(id: u64, author: &str, text: &str, rating: i64) -> Idea {
        Idea {
            id: IdeaId(id),
            author: CollaboratorId::new(author),
            text: text.into(),
            self_rating: Some(r(rating)),
            created_at: id,
            notable: true,
            too_similar_to: None,
            phase_day: 1,
        }
    }

    fn seeds() -> Vec<String> {
        vec!["A clear mask that allows people to see your expressions".into()]
    }

    #[test]
    fn structured_day_split() {
        assert_eq!(diversify_days(2), 1);
        assert_eq!(diversify_days(3), 2);
        assert_eq!(diversify_days(1), 1);
        let day1 = structured_arm(1, 2);
        assert_eq!(
            (day1.mode, day1.method),
            (InspirationMode::Dissimilar, IdeationMethod::AnyIdea)
        );
        let day2 = structured_arm(2, 2);
        assert_eq!(
            (day2.mode, day2.method),
            (InspirationMode::Similar, IdeationMethod::ImproveIdea)
        );
        assert_eq!(structured_arm(2, 3), day1);
    }

    #[test]
    fn structured_prompt_falls_back_to_seeds() {
        let seeds = seeds();
        let t = SimilarityThresholds::default();
        let source = InspirationSource {
            provider: &ReferenceProvider,
            thresholds: &t,
            k: 3,
            seeds: &seeds,
        };
        let p = structured_generation_prompt(
            PromptId(0),
            1,
            2,
            &CollaboratorId::new("u"),
            None,
            &[],
            &source,
        );
        assert_eq!(p.mode, InspirationMode::Dissimilar);
        assert_eq!(p.method, IdeationMethod::AnyIdea);
        assert_eq!(
            p.inspirations,
            vec![Inspiration {
                idea: None,
                text: seeds[0].clone()
            }]
        );
    }

    #[test]
    fn structured_prompt_uses_latest_idea() {
        let seeds = seeds();
        let t = SimilarityThresholds::default();
        let source = InspirationSource {
            provider: &ReferenceProvider,
            thresholds: &t,
            k: 3,
            seeds: &seeds,
        };
        let pool = vec![
            idea(0, "u", "cooling fan mask", 5),
            idea(1, "o", "mask with a fan inside", 5),
            idea(2, "o", "transparent face shield", 5),
        ];
        let p = structured_generation_prompt(
            PromptId(0),
            2,
            2,
            &CollaboratorId::new("u"),
            Some(&pool[0]),
            &pool,
            &source,
        );
        assert_eq!(p.inspirations[0].idea, Some(IdeaId(1)));
        assert_eq!(p.inspirations.len(), 2);
    }

    #[test]
    fn adaptive_prompt_cold_start_and_exploit() {
        let seeds = seeds();
        let t = SimilarityThresholds::default();
        let source = InspirationSource {
            provider: &ReferenceProvider,
            thresholds: &t,
            k: 3,
            seeds: &seeds,
        };
        let user = CollaboratorId::new("u");
        let mut bandit = generation_bandit(2.0).unwrap();
        let p =
            adaptive_generation_prompt(PromptId(0), &bandit, &user, None, &[], &source).unwrap();
        assert_eq!(p.arm(), GenerationArm::ALL[0]);
        for (arm, reward) in GenerationArm::ALL.iter().zip([7, 1, 1, 1]) {
            bandit
                .update(&arm.action_id(), Reward::from_rating(r(reward)))
                .unwrap();
        }
        let p =
            adaptive_generation_prompt(PromptId(1), &bandit, &user, None, &[], &source).unwrap();
        assert_eq!(p.arm(), GenerationArm::ALL[0]);
    }

    #[test]
    fn arm_ids_roundtrip() {
        for arm in GenerationArm::ALL {
            assert_eq!(GenerationArm::from_action_id(&arm.action_id()), Some(arm));
        }
        assert_eq!(
            GenerationArm::from_action_id(&ActionId::new("idea-1")),
            None
        );
        assert_eq!(action_idea(&idea_action(IdeaId(42))), Some(IdeaId(42)));
    }

    #[test]
    fn generation_outcomes() {
        let seeds = seeds();
        let t = SimilarityThresholds::default();
        let source = InspirationSource {
            provider: &ReferenceProvider,
            thresholds: &t,
            k: 3,
            seeds: &seeds,
        };
        let user = CollaboratorId::new("u");

        let mut adaptive = GenerationPolicy::new(PolicyKind::Adaptive, 2.0, false, 2).unwrap();
        let p = adaptive.next_prompt(&user, 1, None, &[], &source).unwrap();
        let d = adaptive
            .record_outcome(&user, p.id, GenerationOutcome::IdeaRated(r(7)))
            .unwrap()
            .unwrap();
        assert_eq!(d.reward, 7.0);
        assert_eq!(d.after.mean, 7.0);
        assert_eq!(
            adaptive.record_outcome(&user, p.id, GenerationOutcome::IdeaRated(r(7))),
            Err(PolicyError::StalePrompt(p.id))
        );

        let p1 = adaptive.next_prompt(&user, 1, None, &[], &source).unwrap();
        let p2 = adaptive.next_prompt(&user, 1, None, &[], &source).unwrap();
        assert_eq!(
            adaptive.record_outcome(&user, p1.id, GenerationOutcome::RequestedDifferent),
            Err(PolicyError::StalePrompt(p1.id))
        );
        let d = adaptive
            .record_outcome(&user, p2.id, GenerationOutcome::RequestedDifferent)
            .unwrap()
            .unwrap();
        assert_eq!(d.reward, 1.0);

        let mut structured = GenerationPolicy::new(PolicyKind::Structured, 2.0, false, 2).unwrap();
        let p = structured
            .next_prompt(&user, 1, None, &[], &source)
            .unwrap();
        assert_eq!(
            structured
                .record_outcome(&user, p.id, GenerationOutcome::IdeaRated(r(4)))
                .unwrap(),
            None
        );
        assert!(structured.bandit_for(&user).is_none());
    }

    #[test]
    fn shared_generation_bandit() {
        let seeds = seeds();
        let t = SimilarityThresholds::default();
        let source = InspirationSource {
            provider: &ReferenceProvider,
            thresholds: &t,
            k: 3,
            seeds: &seeds,
        };
        let mut policy = GenerationPolicy::new(PolicyKind::Adaptive, 2.0, true, 2).unwrap();
        let (a, b) = (CollaboratorId::new("a"), CollaboratorId::new("b"));
        let p = policy.next_prompt(&a, 1, None, &[], &source).unwrap();
        policy
            .record_outcome(&a, p.id, GenerationOutcome::IdeaRated(r(5)))
            .unwrap();
        let p = policy.next_prompt(&b, 1, None, &[], &source).unwrap();
        // the shared bandit already tried the first arm
        assert_eq!(p.arm(), GenerationArm::ALL[1]);
        assert_eq!(policy.bandit_for(&b).unwrap().total_trials(), 1);
    }

    #[test]
    fn review_order_examples() {
        let pool = vec![
            idea(0, "a", "A", 7),
            idea(1, "b", "B", 3),
            idea(2, "c", "C", 5),
        ];
        assert_eq!(
            structured_review_order(&pool),
            vec![IdeaId(0), IdeaId(2), IdeaId(1)]
        );
        let pool = vec![idea(0, "a", "A", 5), idea(1, "b", "B", 5)];
        assert_eq!(structured_review_order(&pool), vec![IdeaId(0), IdeaId(1)]);
        assert!(structured_review_order(&[]).is_empty());
    }

    fn opinion(idea: u64, author: &str, rating: i64) -> OpinionRecord {
        OpinionRecord::new(
            IdeaId(idea),
            CollaboratorId::new(author),
            "x".into(),
            "x".into(),
            r(rating),
            0,
        )
    }

    #[test]
    fn adaptive_review_prefers_uncertain_idea() {
        let ideas = vec![idea(0, "a", "X", 5), idea(1, "b", "Y", 5)];
        let mut policy = SelectionPolicy::start(PolicyKind::Adaptive, &ideas, 2.0).unwrap();
        let mut opinions = Vec::new();
        // X collects {7,7,7}, Y collects {7,1}
        for (i, (idea_id, rating)) in [(0, 7), (1, 7), (0, 7), (1, 1), (0, 7)]
            .into_iter()
            .enumerate()
        {
            opinions.push(opinion(idea_id, &format!("r{i}"), rating));
            let ratings: Vec<Likert7> = opinions
                .iter()
                .filter(|o| o.idea == IdeaId(idea_id))
                .map(|o| o.final_rating)
                .collect();
            policy.record_rating(IdeaId(idea_id), &ratings).unwrap();
        }
        let SelectionPolicy::Adaptive { bandit } = &policy else {
            unreachable!()
        };
        assert_eq!(bandit.arm(&idea_action(IdeaId(0))).unwrap().q, 1.0);
        assert_eq!(
            policy.next_for(&CollaboratorId::new("new"), &ideas, &opinions),
            Some(IdeaId(1))
        );
    }

    #[test]
    fn adaptive_review_skips_own_and_rated() {
        let ideas = vec![
            idea(0, "a", "X", 5),
            idea(1, "b", "Y", 5),
            idea(2, "c", "Z", 5),
        ];
        let policy = SelectionPolicy::start(PolicyKind::Adaptive, &ideas, 2.0).unwrap();
        let reviewer = CollaboratorId::new("a");
        assert_eq!(policy.next_for(&reviewer, &ideas, &[]), Some(IdeaId(1)));
        let opinions = vec![opinion(1, "a", 4)];
        assert_eq!(
            policy.next_for(&reviewer, &ideas, &opinions),
            Some(IdeaId(2))
        );
        let opinions = vec![opinion(1, "a", 4), opinion(2, "a", 4)];
        assert_eq!(policy.next_for(&reviewer, &ideas, &opinions), None);

        let SelectionPolicy::Adaptive { bandit } = &policy else {
            unreachable!()
        };
        let author_of = |id: IdeaId| ideas.iter().find(|i| i.id == id).map(|i| i.author.clone());
        let rated: BTreeSet<IdeaId> = [IdeaId(1), IdeaId(2)].into();
        assert_eq!(
            adaptive_next_review_idea(bandit, &reviewer, author_of, &rated),
            Err(PolicyError::Exhausted)
        );
        let empty = BanditState::default();
        assert_eq!(
            adaptive_next_review_idea(&empty, &reviewer, |_| None, &BTreeSet::new()),
            Err(PolicyError::Exhausted)
        );
    }

    #[test]
    fn structured_review_walks_order() {
        let ideas = vec![
            idea(0, "a", "X", 3),
            idea(1, "b", "Y", 7),
            idea(2, "c", "Z", 5),
        ];
        let policy = SelectionPolicy::start(PolicyKind::Structured, &ideas, 2.0).unwrap();
        let reviewer = CollaboratorId::new("b");
        assert_eq!(policy.next_for(&reviewer, &ideas, &[]), Some(IdeaId(2)));
        let mut policy2 = policy.clone();
        assert_eq!(policy2.record_rating(IdeaId(2), &[r(4)]).unwrap(), None);
        assert_eq!(policy2, policy);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn review_order_is_sorted_permutation(ratings in prop::collection::vec(1i64..=7, 0..40)) {
                let pool: Vec<Idea> = ratings.iter().enumerate().map(|(i, &v)| idea(i as u64, "a", "t", v)).collect();
                let order = structured_review_order(&pool);
                let mut sorted = order.clone();
                sorted.sort();
                let all: Vec<IdeaId> = pool.iter().map(|i| i.id).collect();
                prop_assert_eq!(sorted, all);
                for w in order.windows(2) {
                    let (a, b) = (&pool[w[0].0 as usize], &pool[w[1].0 as usize]);
                    prop_assert!(a.self_rating > b.self_rating || (a.self_rating == b.self_rating && a.id < b.id));
                }
            }

            #[test]
            fn adaptive_generation_stays_within_arms(rewards in prop::collection::vec(1i64..=7, 1..60)) {
                let seeds = vec!["seed".to_string()];
                let t = SimilarityThresholds::default();
                let source = InspirationSource { provider: &ReferenceProvider, thresholds: &t, k: 3, seeds: &seeds };
                let user = CollaboratorId::new("u");
                let mut policy = GenerationPolicy::new(PolicyKind::Adaptive, 2.0, false, 2).unwrap();
                for v in rewards {
                    let p = policy.next_prompt(&user, 1, None, &[], &source).unwrap();
                    prop_assert!(GenerationArm::ALL.contains(&p.arm()));
                    policy.record_outcome(&user, p.id, GenerationOutcome::IdeaRated(r(v))).unwrap();
                }
            }
        }
    }
}
