//! Messages the facilitator sends, and the templates that word them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{IdeaId, OpinionCategory, PhaseKind};
use crate::policies::{GenerationPrompt, IdeationMethod, Inspiration};
use crate::similarity::InspirationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Intro,
    Inspirations,
    MethodSuggestion,
    RatingRequest,
    IdeaPresentation,
    OpinionRequest,
    OthersOpinions,
    ReevaluateSuggestion,
    Thanks,
    Error,
}

impl MessageKind {
    pub const ALL: [MessageKind; 10] = [
        MessageKind::Intro,
        MessageKind::Inspirations,
        MessageKind::MethodSuggestion,
        MessageKind::RatingRequest,
        MessageKind::IdeaPresentation,
        MessageKind::OpinionRequest,
        MessageKind::OthersOpinions,
        MessageKind::ReevaluateSuggestion,
        MessageKind::Thanks,
        MessageKind::Error,
    ];
}

/// What the client should offer for the user's next input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputMode {
    /// Free text for a new idea, plus the "show other ideas" button.
    IdeaText,
    /// The seven rating buttons.
    Rating,
    /// Free text for an opinion.
    OpinionText,
    /// Free text for a revised opinion, or the "keep my opinion" button.
    RevisionOrKeep,
    /// Only the resume button.
    Paused,
    /// Nothing to answer.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatingSubject {
    OwnIdea(IdeaId),
    ReviewedIdea(IdeaId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Acknowledgement {
    IdeaRecorded { idea: IdeaId, notable: bool },
    OpinionShared,
    RatingRecorded,
    ReviewComplete,
    Paused,
}

/// Other collaborators' final opinions on an idea, grouped by category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OthersOpinions {
    pub support: Vec<String>,
    pub neutral: Vec<String>,
    pub against: Vec<String>,
}

impl OthersOpinions {
    pub fn group_mut(&mut self, category: OpinionCategory) -> &mut Vec<String> {
        match category {
            OpinionCategory::Support => &mut self.support,
            OpinionCategory::Neutral => &mut self.neutral,
            OpinionCategory::Against => &mut self.against,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty() && self.neutral.is_empty() && self.against.is_empty()
    }
}

/// A selected idea as announced after selection closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedIdea {
    pub rank: usize,
    pub idea: IdeaId,
    pub text: String,
    pub mean: f64,
    pub n: usize,
    pub exemplars: OthersOpinions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MessageContent {
    Intro {
        phase: PhaseKind,
        goal: String,
        idea_count: Option<usize>,
        selected: Vec<SelectedIdea>,
    },
    Inspirations {
        mode: InspirationMode,
        items: Vec<Inspiration>,
    },
    MethodSuggestion {
        method: IdeationMethod,
    },
    RatingRequest {
        subject: RatingSubject,
    },
    IdeaPresentation {
        idea: IdeaId,
        text: String,
    },
    OpinionRequest {
        idea: IdeaId,
    },
    OthersOpinions {
        idea: IdeaId,
        opinions: OthersOpinions,
    },
    ReevaluateSuggestion {
        idea: IdeaId,
    },
    Thanks {
        ack: Acknowledgement,
    },
    Error {
        reason: String,
    },
}

impl MessageContent {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessageContent::Intro { .. } => MessageKind::Intro,
            MessageContent::Inspirations { .. } => MessageKind::Inspirations,
            MessageContent::MethodSuggestion { .. } => MessageKind::MethodSuggestion,
            MessageContent::RatingRequest { .. } => MessageKind::RatingRequest,
            MessageContent::IdeaPresentation { .. } => MessageKind::IdeaPresentation,
            MessageContent::OpinionRequest { .. } => MessageKind::OpinionRequest,
            MessageContent::OthersOpinions { .. } => MessageKind::OthersOpinions,
            MessageContent::ReevaluateSuggestion { .. } => MessageKind::ReevaluateSuggestion,
            MessageContent::Thanks { .. } => MessageKind::Thanks,
            MessageContent::Error { .. } => MessageKind::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotMessage {
    pub kind: MessageKind,
    pub text: String,
    pub expects: InputMode,
    pub content: MessageContent,
}

/// Message wording keyed by a template name. Placeholders in braces are
/// filled from the message content; unknown placeholders are left as is.
///
/// Keys are the message kind in snake case, with a suffix where one kind has
/// several wordings (for example `intro_generation`, `method_improve`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Templates(BTreeMap<String, String>);

const DEFAULT_TEMPLATES: &[(&str, &str)] = &[
    ("intro_generation", "Welcome! Our goal: {goal}. I will share ideas from other members of your group to inspire you. Please propose as many ideas as possible, unrestricted by current technology or resources."),
    ("intro_selection", "Idea generation is over. Our goal: {goal}. Your group generated {count} ideas. Let's review as many of them as possible together."),
    ("intro_post", "Thank you for taking part! Our goal: {goal}. These are the ideas your group selected."),
    ("inspirations_similar", "Here are other members' ideas similar to yours..."),
    ("inspirations_dissimilar", "Here are other members' ideas dissimilar to yours..."),
    ("inspirations_seed", "Here are some ideas to get you started..."),
    ("method_any", "Can you propose any idea?"),
    ("method_improve", "Can you propose an improved idea?"),
    ("rating_own", "How well does your idea achieve the goal? Please rate it from 1 (very unhelpful) to 7 (very helpful)."),
    ("rating_review", "How much would you like to try out this idea? Please rate it from 1 (not interested at all) to 7 (very interested)."),
    ("idea_presentation", "Here is an idea from your group: {idea}"),
    ("opinion_request", "What do you think about this idea?"),
    ("others_opinions", "Here is what other members think about this idea."),
    ("others_opinions_empty", "Nobody else has shared an opinion on this idea yet."),
    ("reevaluate", "Considering these opinions, would you like to revise your opinion or keep your initial one?"),
    ("thanks_idea", "Thank you for your idea!"),
    ("thanks_repetitive", "Thank you! Your idea is very close to one already shared, so it will not be shown to others."),
    ("thanks_opinion", "Thank you for sharing your opinion."),
    ("thanks_rating", "Thank you for your rating."),
    ("thanks_complete", "You have reviewed every idea available to you. Thank you!"),
    ("thanks_paused", "Paused. Press resume whenever you want to continue."),
    ("error", "Sorry, I can't accept that right now: {reason}"),
];

impl Default for Templates {
    fn default() -> Self {
        Self(
            DEFAULT_TEMPLATES
                .iter()
                .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                .collect(),
        )
    }
}

impl Templates {
    /// Defaults with the given keys replaced.
    pub fn with_overrides(overrides: &BTreeMap<String, String>) -> Self {
        let mut t = Self::default();
        for (k, v) in overrides {
            t.0.insert(k.clone(), v.clone());
        }
        t
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    fn get<'a>(&'a self, key: &'a str) -> &'a str {
        self.0.get(key).map(String::as_str).unwrap_or(key)
    }

    fn fill(&self, key: &str, vars: &[(&str, &str)]) -> String {
        let mut text = self.get(key).to_owned();
        for (name, value) in vars {
            text = text.replace(&format!("{{{name}}}"), value);
        }
        text
    }

    fn key_for(content: &MessageContent) -> &'static str {
        match content {
            MessageContent::Intro { phase, .. } => match phase {
                PhaseKind::Generation => "intro_generation",
                PhaseKind::Selection => "intro_selection",
                PhaseKind::Post => "intro_post",
            },
            MessageContent::Inspirations { mode, items } => {
                if items.iter().all(|i| i.idea.is_none()) {
                    "inspirations_seed"
                } else {
                    match mode {
                        InspirationMode::Similar => "inspirations_similar",
                        InspirationMode::Dissimilar => "inspirations_dissimilar",
                    }
                }
            }
            MessageContent::MethodSuggestion { method } => match method {
                IdeationMethod::AnyIdea => "method_any",
                IdeationMethod::ImproveIdea => "method_improve",
            },
            MessageContent::RatingRequest { subject } => match subject {
                RatingSubject::OwnIdea(_) => "rating_own",
                RatingSubject::ReviewedIdea(_) => "rating_review",
            },
            MessageContent::IdeaPresentation { .. } => "idea_presentation",
            MessageContent::OpinionRequest { .. } => "opinion_request",
            MessageContent::OthersOpinions { opinions, .. } => {
                if opinions.is_empty() {
                    "others_opinions_empty"
                } else {
                    "others_opinions"
                }
            }
            MessageContent::ReevaluateSuggestion { .. } => "reevaluate",
            MessageContent::Thanks { ack } => match ack {
                Acknowledgement::IdeaRecorded { notable: true, .. } => "thanks_idea",
                Acknowledgement::IdeaRecorded { notable: false, .. } => "thanks_repetitive",
                Acknowledgement::OpinionShared => "thanks_opinion",
                Acknowledgement::RatingRecorded => "thanks_rating",
                Acknowledgement::ReviewComplete => "thanks_complete",
                Acknowledgement::Paused => "thanks_paused",
            },
            MessageContent::Error { .. } => "error",
        }
    }

    pub fn render(&self, content: MessageContent, expects: InputMode) -> BotMessage {
        let key = Self::key_for(&content);
        let text = match &content {
            MessageContent::Intro {
                goal, idea_count, ..
            } => {
                let count = idea_count.map(|c| c.to_string()).unwrap_or_default();
                self.fill(key, &[("goal", goal), ("count", &count)])
            }
            MessageContent::IdeaPresentation { text, .. } => self.fill(key, &[("idea", text)]),
            MessageContent::Error { reason } => self.fill(key, &[("reason", reason)]),
            _ => self.fill(key, &[]),
        };
        BotMessage {
            kind: content.kind(),
            text,
            expects,
            content,
        }
    }

    pub fn prompt_messages(&self, prompt: &GenerationPrompt) -> Vec<BotMessage> {
        vec![
            self.render(
                MessageContent::Inspirations {
                    mode: prompt.mode,
                    items: prompt.inspirations.clone(),
                },
                InputMode::IdeaText,
            ),
            self.render(
                MessageContent::MethodSuggestion {
                    method: prompt.method,
                },
                InputMode::IdeaText,
            ),
        ]
    }
}
