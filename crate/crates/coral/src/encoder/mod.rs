//! Trainable hashed bag-of-tokens text encoder.
//!
//! A text is lowercased, split into alphanumeric runs, head-truncated to a
//! per-source token budget, and each token is hashed into one of `buckets`
//! weight rows. The embedding is the mean of the selected rows, L2-normalized.
//! Empty token lists encode to the zero vector, which is treated as a
//! degenerate "no signal" embedding by the scorer.

mod hash;
pub mod store;

use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dialogue, ItemCatalog, PreferenceSet};
use crate::textrep::{self, RenderError};

pub use crate::textrep::SourceKind;
pub use hash::fnv1a64;
pub use store::{
    load_checkpoint, load_table, load_user_vectors, save_checkpoint, save_table,
    save_user_vectors, StoreError,
};

/// Default embedding width.
pub const DEFAULT_DIM: usize = 64;
/// Default hash bucket count (2^18).
pub const DEFAULT_BUCKETS: usize = 1 << 18;
/// Token budget for conversation and item texts.
pub const DOC_MAX_TOKENS: usize = 512;
/// Token budget for preference texts.
pub const PREF_MAX_TOKENS: usize = 256;

/// Dense embedding, f64 throughout so analytic gradients can be checked
/// against finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Zero vector: produced for empty texts, carries no preference signal.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Lowercases and splits into maximal alphanumeric runs, keeping the first
/// `max_tokens` (head truncation).
pub fn tokenize(text: &str, max_tokens: usize) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .take(max_tokens)
        .map(str::to_string)
        .collect()
}

/// Token budget for a rendered source kind.
pub fn token_budget(kind: SourceKind) -> usize {
    match kind {
        SourceKind::DialogueCtx | SourceKind::ItemMeta | SourceKind::ItemFull => DOC_MAX_TOKENS,
        SourceKind::LikePrefs | SourceKind::DislikePrefs => PREF_MAX_TOKENS,
    }
}

/// Longest prefix of `text` spanning at most `max_tokens` alphanumeric
/// runs, with casing and punctuation inside the prefix preserved. Cutting
/// here and tokenizing agrees with tokenizing and then truncating.
pub fn truncate_to_tokens(text: &str, max_tokens: usize) -> &str {
    if max_tokens == 0 {
        return "";
    }
    let mut runs = 0usize;
    let mut in_run = false;
    for (idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if !in_run {
                runs += 1;
                in_run = true;
            }
        } else if in_run {
            in_run = false;
            if runs == max_tokens {
                return &text[..idx];
            }
        }
    }
    text
}

/// Intermediate state of one encode, kept for gradient computation:
/// the bucket of each kept token, the mean-pooled vector, and its norm.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub buckets: Vec<usize>,
    pub pooled: Vec<f64>,
    pub norm: f64,
    pub unit: Embedding,
}

#[derive(Debug, Clone)]
pub struct HashedEncoder {
    dim: usize,
    buckets: usize,
    /// Row-major `buckets x dim` weight matrix.
    weights: Vec<f64>,
}

impl HashedEncoder {
    /// Weights are drawn i.i.d. uniform in [-0.5, 0.5]/sqrt(dim) from a
    /// seeded generator, so construction is reproducible.
    pub fn new(dim: usize, buckets: usize, seed: u64) -> Self {
        assert!(dim > 0 && buckets > 0, "encoder dimensions must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / (dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-half, half).expect("valid range");
        let weights = (0..buckets * dim).map(|_| dist.sample(&mut rng)).collect();
        Self {
            dim,
            buckets,
            weights,
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(DEFAULT_DIM, DEFAULT_BUCKETS, seed)
    }

    pub fn from_weights(dim: usize, buckets: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), buckets * dim, "weight matrix shape mismatch");
        Self {
            dim,
            buckets,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bucket_of(&self, token: &str) -> usize {
        (fnv1a64(token) % self.buckets as u64) as usize
    }

    pub fn row(&self, bucket: usize) -> &[f64] {
        &self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn row_mut(&mut self, bucket: usize) -> &mut [f64] {
        &mut self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    /// Buckets of the tokens that survive truncation, in token order.
    pub fn token_buckets(&self, text: &str, kind: SourceKind) -> Vec<usize> {
        tokenize(text, token_budget(kind))
            .iter()
            .map(|t| self.bucket_of(t))
            .collect()
    }

    /// Encode with intermediate state. Returns None for empty token lists
    /// and for the measure-zero case of exact pooled cancellation; both
    /// correspond to the degenerate zero embedding.
    pub fn encode_traced(&self, text: &str, kind: SourceKind) -> Option<EncodeTrace> {
        let buckets = self.token_buckets(text, kind);
        if buckets.is_empty() {
            return None;
        }
        let mut pooled = vec![0.0; self.dim];
        for &bucket in &buckets {
            let row = self.row(bucket);
            for (p, w) in pooled.iter_mut().zip(row) {
                *p += w;
            }
        }
        let inv = 1.0 / buckets.len() as f64;
        for p in pooled.iter_mut() {
            *p *= inv;
        }
        let norm = pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let unit = Embedding::from_values(pooled.iter().map(|v| v / norm).collect());
        Some(EncodeTrace {
            buckets,
            pooled,
            norm,
            unit,
        })
    }

    /// Unit-norm embedding of `text`, or the zero vector when no tokens
    /// survive.
    pub fn encode(&self, text: &str, kind: SourceKind) -> Embedding {
        match self.encode_traced(text, kind) {
            Some(trace) => trace.unit,
            None => Embedding::zeros(self.dim),
        }
    }

    /// Encodes the three user-side views: conversation context, like text,
    /// and dislike text. Empty preference lists yield zero vectors.
    pub fn encode_user(
        &self,
        dialogue: &Dialogue,
        prefs: &PreferenceSet,
    ) -> Result<UserRepresentation, RenderError> {
        let context = textrep::render_dialogue(dialogue)?;
        let (like, dislike) = textrep::render_preferences(prefs);
        Ok(UserRepresentation {
            dialogue_id: dialogue.id.clone(),
            context: self.encode(&context.text, context.kind),
            like: self.encode(&like.text, like.kind),
            dislike: self.encode(&dislike.text, dislike.kind),
        })
    }
}

/// The three user-side embeddings for one dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRepresentation {
    pub dialogue_id: String,
    pub context: Embedding,
    pub like: Embedding,
    pub dislike: Embedding,
}

/// Item embeddings keyed by id, iterated in id order. Rows are stored as
/// f32, matching the on-disk format exactly, so save/load round trips are
/// bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: String, row: Vec<f32>) -> Result<(), StoreError> {
        if row.len() != self.dim {
            return Err(StoreError::Format {
                message: format!(
                    "row for {id:?} has dim {}, table has dim {}",
                    row.len(),
                    self.dim
                ),
            });
        }
        self.entries.insert(id, row);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Row promoted to f64 (exact).
    pub fn embedding(&self, id: &str) -> Option<Embedding> {
        self.get(id)
            .map(|row| Embedding::from_values(row.iter().map(|v| f64::from(*v)).collect()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(id, row)| (id.as_str(), row.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Encodes every catalog item's full text into a table. Deterministic given
/// the encoder and catalog.
pub fn build_item_table(
    encoder: &HashedEncoder,
    catalog: &ItemCatalog,
) -> Result<EmbeddingTable, RenderError> {
    let mut table = EmbeddingTable::new(encoder.dim());
    for item in catalog.iter() {
        let rendered = textrep::render_item(item)?;
        let emb = encoder.encode(&rendered.text, rendered.kind);
        let row = emb.values().iter().map(|v| *v as f32).collect();
        table
            .insert(item.id.clone(), row)
            .expect("encoder output has table dim");
    }
    Ok(table)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Pooling is order-invariant: permuting tokens cannot change the
        /// embedding because the mean is commutative.
        #[test]
        fn pooling_is_token_order_invariant(
            mut tokens in proptest::collection::vec("[a-z]{1,6}", 1..20),
            seed in 0u64..1000,
        ) {
            let enc = HashedEncoder::new(8, 128, seed);
            let forward = enc.encode(&tokens.join(" "), SourceKind::DialogueCtx);
            tokens.reverse();
            let backward = enc.encode(&tokens.join(" "), SourceKind::DialogueCtx);
            for (a, b) in forward.values().iter().zip(backward.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn nonempty_encodings_are_unit_norm(
            text in "[a-z ]{1,40}",
            seed in 0u64..1000,
        ) {
            let enc = HashedEncoder::new(8, 128, seed);
            let emb = enc.encode(&text, SourceKind::DialogueCtx);
            if !emb.is_degenerate() {
                prop_assert!((emb.norm() - 1.0).abs() < 1e-9);
            }
        }

        /// Truncating text first and then tokenizing equals tokenizing and
        /// then taking the budget.
        #[test]
        fn truncation_commutes_with_tokenization(
            text in "[a-zA-Z,.! ]{0,80}",
            max in 0usize..12,
        ) {
            let cut = truncate_to_tokens(&text, max);
            prop_assert_eq!(tokenize(cut, usize::MAX), tokenize(&text, max));
        }
    }
}
