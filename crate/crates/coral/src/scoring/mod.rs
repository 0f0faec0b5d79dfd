//! Preference-aware item scoring and ranking.
//!
//! An item is scored against the three user-side embeddings as
//! `sim(h_c, h_i) + alpha * sim(h_l, h_i) - beta * sim(h_d, h_i)`,
//! where `sim` is the dot product (cosine similarity on unit vectors).
//! Disabled or degenerate preference terms contribute exactly zero, so the
//! conversation-only score falls out of the same formula.

pub mod bm25;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::encoder::{Embedding, EmbeddingTable, UserRepresentation};

pub use bm25::{bm25_rank, InvertedIndex};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("cannot rank against an empty embedding table")]
    EmptyTable,
    #[error("cannot rank against an empty index")]
    EmptyIndex,
}

/// Score weights. `alpha` scales the like term, `beta` the dislike penalty;
/// the flags switch whole terms off for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub alpha: f64,
    pub beta: f64,
    pub use_like: bool,
    pub use_dislike: bool,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            use_like: true,
            use_dislike: true,
        }
    }
}

impl ScoringParams {
    /// Conversation-only scoring: both preference terms off.
    pub fn context_only() -> Self {
        Self {
            use_like: false,
            use_dislike: false,
            ..Self::default()
        }
    }
}

/// Dot product. On unit vectors this is cosine similarity.
pub fn sim(a: &Embedding, b: &Embedding) -> Result<f64, ScoreError> {
    if a.dim() != b.dim() {
        return Err(ScoreError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(dot(a.values(), b.values()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_row(a: &[f64], row: &[f32]) -> f64 {
    a.iter().zip(row).map(|(x, y)| x * f64::from(*y)).sum()
}

/// Three-term preference score of one item embedding.
pub fn score(
    user: &UserRepresentation,
    item: &Embedding,
    params: &ScoringParams,
) -> Result<f64, ScoreError> {
    let mut total = sim(&user.context, item)?;
    if params.use_like {
        total += params.alpha * sim(&user.like, item)?;
    }
    if params.use_dislike {
        total -= params.beta * sim(&user.dislike, item)?;
    }
    Ok(total)
}

/// Same score against an f32 table row, promoting each element exactly.
/// Identical arithmetic to [`score`] on the promoted row.
pub fn score_row(
    user: &UserRepresentation,
    row: &[f32],
    params: &ScoringParams,
) -> Result<f64, ScoreError> {
    if user.context.dim() != row.len() {
        return Err(ScoreError::DimMismatch {
            left: user.context.dim(),
            right: row.len(),
        });
    }
    let mut total = dot_row(user.context.values(), row);
    if params.use_like {
        total += params.alpha * dot_row(user.like.values(), row);
    }
    if params.use_dislike {
        total -= params.beta * dot_row(user.dislike.values(), row);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item_id: String,
    pub score: f64,
}

/// Top-k ranking, strictly ordered by score descending with item id
/// ascending as the tie-break. Built only through [`RankedList::from_scores`],
/// which enforces the ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

/// The shared ordering for every ranker: score descending, id ascending.
fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl RankedList {
    pub fn from_scores(mut scores: Vec<(String, f64)>, k: usize) -> Self {
        scores.sort_by(rank_order);
        scores.truncate(k);
        Self {
            entries: scores
                .into_iter()
                .map(|(item_id, score)| RankedEntry { item_id, score })
                .collect(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores every table entry and returns the top `k`.
pub fn rank(
    user: &UserRepresentation,
    table: &EmbeddingTable,
    params: &ScoringParams,
    k: usize,
) -> Result<RankedList, ScoreError> {
    if table.is_empty() {
        return Err(ScoreError::EmptyTable);
    }
    let mut scores = Vec::with_capacity(table.len());
    for (id, row) in table.iter() {
        scores.push((id.to_string(), score_row(user, row, params)?));
    }
    Ok(RankedList::from_scores(scores, k))
}
