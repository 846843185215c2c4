//! Shared vocabulary of an ideation event: collaborators, ideas, ratings and
//! opinions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since the Unix epoch. Every timestamp inside the engine is
/// supplied by the caller so that replays see exactly the same clock.
pub type Timestamp = u64;

/// Default upper bound on idea and opinion length, in characters.
pub const DEFAULT_MAX_TEXT_CHARS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CollaboratorId(pub String);

impl CollaboratorId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CollaboratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A participant. The alias is the only label ever shown to other people.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collaborator {
    pub id: CollaboratorId,
    pub display_alias: String,
    pub joined_at: Timestamp,
}

/// Ideas are numbered in creation order, so the id doubles as the
/// deterministic tie-breaker everywhere an ordering is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdeaId(pub u64);

impl fmt::Display for IdeaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "idea-{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("rating {0} is outside the 1-7 scale")]
pub struct InvalidRating(pub i64);

/// A 7-point Likert rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Likert7(u8);

impl Likert7 {
    pub const MIN: Likert7 = Likert7(1);
    pub const MAX: Likert7 = Likert7(7);

    pub fn new(value: i64) -> Result<Self, InvalidRating> {
        if (1..=7).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(InvalidRating(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// All seven ratings in ascending order.
    pub fn all() -> impl Iterator<Item = Likert7> {
        (1..=7).map(Likert7)
    }
}

impl TryFrom<i64> for Likert7 {
    type Error = InvalidRating;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Likert7::new(value)
    }
}

impl From<Likert7> for u8 {
    fn from(r: Likert7) -> u8 {
        r.0
    }
}

impl fmt::Display for Likert7 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Idea {
    pub id: IdeaId,
    pub author: CollaboratorId,
    pub text: String,
    pub self_rating: Option<Likert7>,
    pub created_at: Timestamp,
    /// False when the idea was filtered as repetitive.
    pub notable: bool,
    /// The notable idea this one repeated, when filtered.
    pub too_similar_to: Option<IdeaId>,
    pub phase_day: u32,
}

impl Idea {
    /// Whether the idea may be shown as inspiration or put up for review.
    pub fn is_poolable(&self) -> bool {
        self.notable && self.self_rating.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpinionCategory {
    Support,
    Neutral,
    Against,
}

impl OpinionCategory {
    pub const ALL: [OpinionCategory; 3] = [
        OpinionCategory::Support,
        OpinionCategory::Neutral,
        OpinionCategory::Against,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OpinionCategory::Support => "support",
            OpinionCategory::Neutral => "neutral",
            OpinionCategory::Against => "against",
        }
    }
}

/// 1-3 against, 4 neutral, 5-7 support.
pub fn categorize_opinion(rating: Likert7) -> OpinionCategory {
    match rating.value() {
        1..=3 => OpinionCategory::Against,
        4 => OpinionCategory::Neutral,
        _ => OpinionCategory::Support,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionRecord {
    pub idea: IdeaId,
    pub author: CollaboratorId,
    pub initial_text: String,
    pub revised_text: String,
    pub final_rating: Likert7,
    pub category: OpinionCategory,
    pub created_at: Timestamp,
}

impl OpinionRecord {
    pub fn new(
        idea: IdeaId,
        author: CollaboratorId,
        initial_text: String,
        revised_text: String,
        final_rating: Likert7,
        created_at: Timestamp,
    ) -> Self {
        Self {
            idea,
            author,
            initial_text,
            revised_text,
            final_rating,
            category: categorize_opinion(final_rating),
            created_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhaseKind {
    Generation,
    Selection,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub kind: PhaseKind,
    pub days: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GoalError {
    #[error("phase schedule needs at least one {0:?} phase")]
    MissingPhase(PhaseKind),
    #[error("phase {0:?} must last at least one day")]
    ZeroDays(PhaseKind),
    #[error("phases must appear in Generation, Selection, Post order")]
    OutOfOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeationGoal {
    pub text: String,
    pub phase_schedule: Vec<PhaseSpan>,
}

impl IdeationGoal {
    pub fn validate(&self) -> Result<(), GoalError> {
        for needed in [PhaseKind::Generation, PhaseKind::Selection] {
            if !self.phase_schedule.iter().any(|p| p.kind == needed) {
                return Err(GoalError::MissingPhase(needed));
            }
        }
        if let Some(p) = self.phase_schedule.iter().find(|p| p.days == 0) {
            return Err(GoalError::ZeroDays(p.kind));
        }
        if self
            .phase_schedule
            .windows(2)
            .any(|w| w[0].kind > w[1].kind)
        {
            return Err(GoalError::OutOfOrder);
        }
        Ok(())
    }

    /// Total days scheduled for a phase kind.
    pub fn days_of(&self, kind: PhaseKind) -> u32 {
        self.phase_schedule
            .iter()
            .filter(|p| p.kind == kind)
            .map(|p| p.days)
            .sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TextRejection {
    #[error("the message is empty")]
    Empty,
    #[error("the message is longer than {limit} characters")]
    TooLong { limit: usize },
}

/// Trims the text and checks it against the length limit (in characters,
/// measured after trimming).
pub fn validate_idea_text(text: &str, max_chars: usize) -> Result<String, TextRejection> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(TextRejection::Empty);
    }
    if trimmed.chars().count() > max_chars {
        return Err(TextRejection::TooLong { limit: max_chars });
    }
    Ok(trimmed.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> Likert7 {
        Likert7::new(v).unwrap()
    }

    #[test]
    fn likert_bounds() {
        assert!(Likert7::new(0).is_err());
        assert!(Likert7::new(8).is_err());
        assert_eq!(Likert7::all().count(), 7);
        assert!(serde_json::from_str::<Likert7>("9").is_err());
        assert_eq!(serde_json::from_str::<Likert7>("5").unwrap(), r(5));
        assert_eq!(serde_json::to_string(&r(3)).unwrap(), "3");
    }

    #[test]
    fn categorize_examples() {
        assert_eq!(categorize_opinion(r(1)), OpinionCategory::Against);
        assert_eq!(categorize_opinion(r(4)), OpinionCategory::Neutral);
        assert_eq!(categorize_opinion(r(6)), OpinionCategory::Support);
    }

    #[test]
    fn categories_partition_scale() {
        let expected = [
            OpinionCategory::Against,
            OpinionCategory::Against,
            OpinionCategory::Against,
            OpinionCategory::Neutral,
            OpinionCategory::Support,
            OpinionCategory::Support,
            OpinionCategory::Support,
        ];
        let got: Vec<_> = Likert7::all().map(categorize_opinion).collect();
        assert_eq!(got, expected);
        for c in OpinionCategory::ALL {
            assert!(got.contains(&c));
        }
    }

    #[test]
    fn opinion_record_category_follows_rating() {
        let rec = OpinionRecord::new(
            IdeaId(1),
            CollaboratorId::new("u"),
            "ok".into(),
            "ok".into(),
            r(2),
            0,
        );
        assert_eq!(rec.category, OpinionCategory::Against);
    }

    #[test]
    fn text_validation() {
        assert_eq!(validate_idea_text("  ", 1000), Err(TextRejection::Empty));
        assert_eq!(
            validate_idea_text("  Clear masks for expressions ", 1000).unwrap(),
            "Clear masks for expressions"
        );
        let long = "x".repeat(1001);
        assert_eq!(
            validate_idea_text(&long, 1000),
            Err(TextRejection::TooLong { limit: 1000 })
        );
        assert!(validate_idea_text(&"x".repeat(1000), 1000).is_ok());
        // characters, not bytes
        assert!(validate_idea_text(&"é".repeat(1000), 1000).is_ok());
    }

    #[test]
    fn goal_validation() {
        let mut goal = IdeationGoal {
            text: "masks".into(),
            phase_schedule: vec![
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
            ],
        };
        assert!(goal.validate().is_ok());
        assert_eq!(goal.days_of(PhaseKind::Generation), 2);
        goal.phase_schedule.remove(1);
        assert_eq!(
            goal.validate(),
            Err(GoalError::MissingPhase(PhaseKind::Selection))
        );
    }

    #[test]
    fn idea_roundtrips_field_for_field() {
        let idea = Idea {
            id: IdeaId(7),
            author: CollaboratorId::new("u1"),
            text: "A clear mask".into(),
            self_rating: Some(r(6)),
            created_at: 1_700_000_000_000,
            notable: false,
            too_similar_to: Some(IdeaId(2)),
            phase_day: 2,
        };
        let json = serde_json::to_string(&idea).unwrap();
        assert_eq!(serde_json::from_str::<Idea>(&json).unwrap(), idea);
    }
}
