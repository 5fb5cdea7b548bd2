//! Penalty-based candidate reranking.
//!
//! Each candidate's spoken text is scored on one reward (keyword relevance)
//! and five penalties; the total is `w_rel·relevance − Σ w_i·penalty_i`.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{Catalogue, ProductRecord};
use crate::dialogue::{validate_claims, HostResponse};
use crate::text::{char_ngram_set, char_ngrams, normalize};

/// Number of recent responses kept for overlap scoring.
pub const HISTORY_CAPACITY: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub response: HostResponse,
    pub raw: String,
    /// Generation order within the batch.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankScore {
    pub relevance: f64,
    pub misalignment_penalty: f64,
    pub unsanctioned_penalty: f64,
    pub repetition_penalty: f64,
    pub formulaic_penalty: f64,
    pub overlap_penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankWeights {
    pub relevance: f64,
    pub misalignment: f64,
    pub unsanctioned: f64,
    pub repetition: f64,
    pub formulaic: f64,
    pub overlap: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        // The unsanctioned weight exceeds the largest possible swing of every
        // other component combined (1 + 2 + 1 + 0.5 + 1), so a candidate with an
        // unsanctioned mention can never outrank a clean one.
        Self {
            relevance: 1.0,
            misalignment: 2.0,
            unsanctioned: 6.0,
            repetition: 1.0,
            formulaic: 0.5,
            overlap: 1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("cannot rerank an empty batch")]
    EmptyBatch,
    #[error("reranker weight {0} must be non-negative and finite")]
    BadWeight(&'static str),
    #[error("duplicate candidate index {0}")]
    DuplicateIndex(usize),
}

impl RerankWeights {
    pub fn validate(&self) -> Result<(), RerankError> {
        for (name, w) in [
            ("relevance", self.relevance),
            ("misalignment", self.misalignment),
            ("unsanctioned", self.unsanctioned),
            ("repetition", self.repetition),
            ("formulaic", self.formulaic),
            ("overlap", self.overlap),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(RerankError::BadWeight(name));
            }
        }
        Ok(())
    }

    fn total(&self, s: &RerankScore) -> f64 {
        self.relevance * s.relevance
            - self.misalignment * s.misalignment_penalty
            - self.unsanctioned * s.unsanctioned_penalty
            - self.repetition * s.repetition_penalty
            - self.formulaic * s.formulaic_penalty
            - self.overlap * s.overlap_penalty
    }
}

/// FIFO ring of the most recent selected spoken texts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentHistory {
    entries: VecDeque<String>,
}

impl RecentHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, spoken: impl Into<String>) {
        if self.entries.len() == HISTORY_CAPACITY {
            self.entries.pop_front();
        }
        self.entries.push_back(spoken.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

/// Fraction of the candidate's character n-grams that occur anywhere in the
/// history.
pub fn ngram_overlap(candidate_text: &str, history: &RecentHistory, n: usize) -> f64 {
    assert!(n >= 1, "n-gram size must be at least 1");
    let grams = char_ngram_set(&normalize(candidate_text), n);
    if grams.is_empty() || history.is_empty() {
        return 0.0;
    }
    let seen: HashSet<String> = history
        .iter()
        .flat_map(|h| char_ngrams(&normalize(h), n))
        .collect();
    let shared = grams.iter().filter(|g| seen.contains(*g)).count();
    shared as f64 / grams.len() as f64
}

/// Share of repeated character n-grams within a single text.
pub fn internal_repetition(text: &str, n: usize) -> f64 {
    let grams = char_ngrams(&normalize(text), n);
    if grams.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<&String> = grams.iter().collect();
    (grams.len() - distinct.len()) as f64 / grams.len() as f64
}

/// Everything the scorer needs besides the candidate.
#[derive(Debug, Clone, Copy)]
pub struct RerankContext<'a> {
    pub comment: &'a str,
    pub active: Option<&'a ProductRecord>,
    pub history: &'a RecentHistory,
    pub catalogue: &'a Catalogue,
    pub stock_openings: &'a [String],
    pub ngram: usize,
}

pub fn score(c: &Candidate, ctx: &RerankContext<'_>, weights: &RerankWeights) -> RerankScore {
    let spoken = normalize(&c.response.spoken);

    let active_keywords = ctx
        .active
        .map(|p| ctx.catalogue.record_keywords(p))
        .unwrap_or_default();
    let comment = normalize(ctx.comment);
    let mut targets: Vec<String> = active_keywords.clone();
    targets.extend(
        ctx.catalogue
            .lexicon_terms()
            .iter()
            .filter(|t| comment.contains(t.as_str()))
            .cloned(),
    );
    targets.sort();
    targets.dedup();
    let relevance = if targets.is_empty() {
        0.0
    } else {
        targets.iter().filter(|t| spoken.contains(t.as_str())).count() as f64 / targets.len() as f64
    };

    let misalignment_penalty = match ctx.active {
        Some(_) if !active_keywords.iter().any(|k| spoken.contains(k.as_str())) => 1.0,
        _ => 0.0,
    };

    let unsanctioned_penalty = validate_claims(&c.response, ctx.active, ctx.catalogue)
        .iter()
        .filter(|v| v.is_unsanctioned_mention())
        .count() as f64;

    let repetition_penalty = internal_repetition(&c.response.spoken, ctx.ngram);

    let formulaic_penalty = if ctx
        .stock_openings
        .iter()
        .map(|p| normalize(p))
        .any(|p| !p.is_empty() && spoken.starts_with(p.as_str()))
    {
        1.0
    } else {
        0.0
    };

    let overlap_penalty = ngram_overlap(&c.response.spoken, ctx.history, ctx.ngram);

    let mut s = RerankScore {
        relevance,
        misalignment_penalty,
        unsanctioned_penalty,
        repetition_penalty,
        formulaic_penalty,
        overlap_penalty,
        total: 0.0,
    };
    s.total = weights.total(&s);
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome<'a> {
    pub winner: &'a Candidate,
    /// Scores in batch order.
    pub scores: Vec<RerankScore>,
}

/// Picks the highest-total candidate, breaking ties by lowest index. With
/// `disabled` set, the lowest-index candidate wins and scores are still
/// computed for logging.
pub fn rerank<'a>(
    batch: &'a [Candidate],
    ctx: &RerankContext<'_>,
    weights: &RerankWeights,
    disabled: bool,
) -> Result<RerankOutcome<'a>, RerankError> {
    if batch.is_empty() {
        return Err(RerankError::EmptyBatch);
    }
    let mut seen = HashSet::with_capacity(batch.len());
    for c in batch {
        if !seen.insert(c.index) {
            return Err(RerankError::DuplicateIndex(c.index));
        }
    }
    let scores: Vec<RerankScore> = batch.iter().map(|c| score(c, ctx, weights)).collect();
    let mut best = 0;
    for i in 1..batch.len() {
        let better = if disabled {
            batch[i].index < batch[best].index
        } else {
            scores[i].total > scores[best].total
                || (scores[i].total == scores[best].total && batch[i].index < batch[best].index)
        };
        if better {
            best = i;
        }
    }
    Ok(RerankOutcome {
        winner: &batch[best],
        scores,
    })
}
