//! Semantic similarity between idea texts.
//!
//! Scores live on a 0-5 scale and are split into three ranges: at or below
//! `similar_cut` a pair is dissimilar, above it similar, and above
//! `too_similar_cut` the pair counts as a repetition. The engine only ever
//! talks to a [`SimilarityProvider`]; [`ReferenceProvider`] is a deterministic
//! bag-of-words stand-in and [`RemoteProvider`] calls an external scoring
//! service, falling back to the reference provider on failure.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CollaboratorId, Idea, IdeaId};

pub const MAX_SCORE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    /// Clamps into `[0, 5]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Self(0.0);
        }
        Self(value.clamp(0.0, MAX_SCORE))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SimilarityClass {
    Dissimilar,
    Similar,
    TooSimilar,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("thresholds must satisfy 0 < similar ({similar}) < too_similar ({too_similar}) < 5")]
pub struct InvalidThresholds {
    pub similar: f64,
    pub too_similar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityThresholds {
    pub similar_cut: f64,
    pub too_similar_cut: f64,
}

impl Default for SimilarityThresholds {
    fn default() -> Self {
        Self {
            similar_cut: 2.0,
            too_similar_cut: 3.0,
        }
    }
}

impl SimilarityThresholds {
    pub fn new(similar_cut: f64, too_similar_cut: f64) -> Result<Self, InvalidThresholds> {
        let t = Self {
            similar_cut,
            too_similar_cut,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), InvalidThresholds> {
        let ok = 0.0 < self.similar_cut
            && self.similar_cut < self.too_similar_cut
            && self.too_similar_cut < MAX_SCORE;
        if ok {
            Ok(())
        } else {
            Err(InvalidThresholds {
                similar: self.similar_cut,
                too_similar: self.too_similar_cut,
            })
        }
    }
}

/// A score equal to a cut stays in the lower class.
pub fn classify(score: SimilarityScore, thresholds: &SimilarityThresholds) -> SimilarityClass {
    let s = score.value();
    if s > thresholds.too_similar_cut {
        SimilarityClass::TooSimilar
    } else if s > thresholds.similar_cut {
        SimilarityClass::Similar
    } else {
        SimilarityClass::Dissimilar
    }
}

/// Anything that can score text pairs. Implementations must be symmetric and
/// callable from several sessions at once.
pub trait SimilarityProvider: Send + Sync {
    fn score(&self, a: &str, b: &str) -> SimilarityScore;

    fn score_many(&self, query: &str, pool: &[&str]) -> Vec<SimilarityScore> {
        pool.iter().map(|text| self.score(query, text)).collect()
    }
}

fn term_frequencies(text: &str) -> BTreeMap<String, u32> {
    let mut tf = BTreeMap::new();
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        *tf.entry(token.to_lowercase()).or_insert(0) += 1;
    }
    tf
}

/// Cosine similarity of lowercased term-frequency vectors, scaled to 0-5.
///
/// Terms are visited in sorted order on both sides so the result is
/// bit-for-bit symmetric.
pub fn reference_score(a: &str, b: &str) -> SimilarityScore {
    let ta = term_frequencies(a);
    let tb = term_frequencies(b);
    if ta.is_empty() || tb.is_empty() {
        let same = a.trim().to_lowercase() == b.trim().to_lowercase();
        return SimilarityScore::new(if same { MAX_SCORE } else { 0.0 });
    }
    if ta == tb {
        return SimilarityScore::new(MAX_SCORE);
    }
    let dot: f64 = ta
        .iter()
        .filter_map(|(term, &x)| tb.get(term).map(|&y| f64::from(x) * f64::from(y)))
        .sum();
    let norm = |tf: &BTreeMap<String, u32>| -> f64 {
        tf.values().map(|&x| f64::from(x) * f64::from(x)).sum()
    };
    let cosine = dot / (norm(&ta) * norm(&tb)).sqrt();
    SimilarityScore::new(cosine * MAX_SCORE)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceProvider;

impl SimilarityProvider for ReferenceProvider {
    fn score(&self, a: &str, b: &str) -> SimilarityScore {
        reference_score(a, b)
    }
}

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query: String,
    pub pool: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("service returned {got} scores for {expected} texts")]
    LengthMismatch { expected: usize, got: usize },
}

/// Client for an external `/score` service. Any failure (timeout, HTTP
/// status >= 400, malformed body) is logged and answered by the reference
/// provider instead.
pub struct RemoteProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
    fallback: ReferenceProvider,
}

impl RemoteProvider {
    /// `base_url` is the service root; requests go to `{base_url}/score`.
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, RemoteError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()?;
        Ok(Self {
            endpoint: format!("{}/score", base_url.trim_end_matches('/')),
            client,
            fallback: ReferenceProvider,
        })
    }

    pub fn try_score_many(
        &self,
        query: &str,
        pool: &[&str],
    ) -> Result<Vec<SimilarityScore>, RemoteError> {
        let body = ScoreRequest {
            query: query.to_owned(),
            pool: pool.iter().map(|s| (*s).to_owned()).collect(),
        };
        let response: ScoreResponse = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()?
            .error_for_status()?
            .json()?;
        if response.scores.len() != pool.len() {
            return Err(RemoteError::LengthMismatch {
                expected: pool.len(),
                got: response.scores.len(),
            });
        }
        Ok(response
            .scores
            .into_iter()
            .map(SimilarityScore::new)
            .collect())
    }
}

impl SimilarityProvider for RemoteProvider {
    fn score(&self, a: &str, b: &str) -> SimilarityScore {
        self.score_many(a, &[b])[0]
    }

    fn score_many(&self, query: &str, pool: &[&str]) -> Vec<SimilarityScore> {
        if pool.is_empty() {
            return Vec::new();
        }
        match self.try_score_many(query, pool) {
            Ok(scores) => scores,
            Err(err) => {
                tracing::warn!(endpoint = %self.endpoint, error = %err, "similarity service unavailable, using reference scores");
                self.fallback.score_many(query, pool)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InspirationMode {
    Similar,
    Dissimilar,
}

/// Up to `k` of other people's ideas ranked by similarity to `query`:
/// most similar first in `Similar` mode, least similar first in
/// `Dissimilar` mode. Only poolable ideas qualify, repetitions of the query
/// are never returned, and equal scores keep creation order. An empty result
/// tells the caller to fall back to seed inspirations.
pub fn top_k<'a>(
    provider: &dyn SimilarityProvider,
    thresholds: &SimilarityThresholds,
    query: &str,
    pool: &'a [Idea],
    k: usize,
    mode: InspirationMode,
    exclude_author: &CollaboratorId,
) -> Vec<&'a Idea> {
    let candidates: Vec<&Idea> = pool
        .iter()
        .filter(|idea| idea.is_poolable() && &idea.author != exclude_author)
        .collect();
    if candidates.is_empty() || k == 0 {
        return Vec::new();
    }
    let texts: Vec<&str> = candidates.iter().map(|i| i.text.as_str()).collect();
    let scores = provider.score_many(query, &texts);
    let mut ranked: Vec<(&Idea, SimilarityScore)> = candidates
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| classify(*s, thresholds) != SimilarityClass::TooSimilar)
        .collect();
    ranked.sort_by(|(ia, sa), (ib, sb)| {
        let by_score = match mode {
            InspirationMode::Similar => sb.value().total_cmp(&sa.value()),
            InspirationMode::Dissimilar => sa.value().total_cmp(&sb.value()),
        };
        by_score.then(ia.id.cmp(&ib.id))
    });
    ranked.into_iter().take(k).map(|(idea, _)| idea).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionMatch {
    pub idea: IdeaId,
    pub score: SimilarityScore,
}

/// Returns the closest notable idea when the candidate scores above the
/// too-similar cut against it.
pub fn is_repetitive(
    provider: &dyn SimilarityProvider,
    thresholds: &SimilarityThresholds,
    candidate: &str,
    pool: &[Idea],
) -> Option<RepetitionMatch> {
    let notable: Vec<&Idea> = pool.iter().filter(|i| i.notable).collect();
    if notable.is_empty() {
        return None;
    }
    let texts: Vec<&str> = notable.iter().map(|i| i.text.as_str()).collect();
    let scores = provider.score_many(candidate, &texts);
    let mut best: Option<RepetitionMatch> = None;
    for (idea, score) in notable.into_iter().zip(scores) {
        if best.is_none_or(|b| score.value() > b.score.value()) {
            best = Some(RepetitionMatch {
                idea: idea.id,
                score,
            });
        }
    }
    best.filter(|m| classify(m.score, thresholds) == SimilarityClass::TooSimilar)
}
