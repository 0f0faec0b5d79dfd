//! Hard-negative sampling for contrastive training.
//!
//! For one dialogue, every catalog item gets probability
//! `softmax(sim(h_c, h_i))` over the frozen epoch-start table; training then
//! draws k distinct negatives per positive without replacement, with the
//! positive removed and the remaining mass renormalized. Draws are seeded and
//! fully deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::{Embedding, EmbeddingTable};
use crate::scoring::ScoreError;

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("cannot build a sampling distribution over an empty table")]
    EmptyTable,
    #[error("requested {requested} negatives but only {available} candidates remain")]
    InsufficientItems { requested: usize, available: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Categorical distribution over item ids, in table id order.
#[derive(Debug, Clone)]
pub struct NegativeDistribution {
    ids: Vec<String>,
    probs: Vec<f64>,
}

impl NegativeDistribution {
    /// Builds directly from probabilities. They must be positive and sum to
    /// one within 1e-9; the stored vector is renormalized exactly.
    pub fn from_probs(ids: Vec<String>, probs: Vec<f64>) -> Result<Self, SampleError> {
        if ids.len() != probs.len() || ids.is_empty() {
            return Err(SampleError::InvalidProbs(format!(
                "{} ids vs {} probabilities",
                ids.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(SampleError::InvalidProbs(
                "probabilities must be finite and positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SampleError::InvalidProbs(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let probs = probs.iter().map(|p| p / total).collect();
        Ok(Self { ids, probs })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, id: &str) -> Option<f64> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|idx| self.probs[idx])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Similarity-softmax distribution over the table for one conversation
/// embedding, computed with the max-shift for stability.
pub fn neg_distribution(
    h_c: &Embedding,
    table: &EmbeddingTable,
) -> Result<NegativeDistribution, SampleError> {
    if table.is_empty() {
        return Err(SampleError::EmptyTable);
    }
    let mut ids = Vec::with_capacity(table.len());
    let mut sims = Vec::with_capacity(table.len());
    for (id, row) in table.iter() {
        if h_c.dim() != row.len() {
            return Err(SampleError::Score(ScoreError::DimMismatch {
                left: h_c.dim(),
                right: row.len(),
            }));
        }
        let sim: f64 = h_c.values().iter().zip(row).map(|(a, b)| a * f64::from(*b)).sum();
        ids.push(id.to_string());
        sims.push(sim);
    }
    let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / total).collect();
    Ok(NegativeDistribution { ids, probs })
}

/// Distinct negative item ids drawn for one positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSet {
    pub ids: Vec<String>,
}

/// Draws `k` distinct ids without replacement, proportionally to the
/// distribution with `positive` removed. Same inputs and seed, same output.
pub fn sample_negatives(
    dist: &NegativeDistribution,
    k: usize,
    positive: &str,
    seed: u64,
) -> Result<NegativeSet, SampleError> {
    let mut remaining: Vec<(usize, f64)> = dist
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| id.as_str() != positive)
        .map(|(idx, _)| (idx, dist.probs[idx]))
        .collect();
    if k > remaining.len() {
        return Err(SampleError::InsufficientItems {
            requested: k,
            available: remaining.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(k);
    for _ in 0..k {
        let mass: f64 = remaining.iter().map(|(_, p)| p).sum();
        let target = rng.random::<f64>() * mass;
        let mut cumulative = 0.0;
        let mut chosen = remaining.len() - 1;
        for (pos, (_, p)) in remaining.iter().enumerate() {
            cumulative += p;
            if target < cumulative {
                chosen = pos;
                break;
            }
        }
        let (idx, _) = remaining.remove(chosen);
        ids.push(dist.ids[idx].clone());
    }
    Ok(NegativeSet { ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with_sims(sims: &[f64]) -> (Embedding, EmbeddingTable) {
        // One-dimensional rows make sim(h_c, row) equal the row value.
        let mut table = EmbeddingTable::new(1);
        for (i, s) in sims.iter().enumerate() {
            table.insert(format!("i{i}"), vec![*s as f32]).unwrap();
        }
        (Embedding::from_values(vec![1.0]), table)
    }

    #[test]
    fn softmax_headline_example() {
        // sims (ln 2, 0) must yield probabilities (2/3, 1/3).
        let (h_c, table) = table_with_sims(&[2.0f64.ln(), 0.0]);
        let dist = neg_distribution(&h_c, &table).unwrap();
        assert!((dist.probs()[0] - 2.0 / 3.0).abs() < 1e-6);
        assert!((dist.probs()[1] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn probabilities_sum_to_one_for_random_sims() {
        use rand::Rng as _;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sims: Vec<f64> = (0..100).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (h_c, table) = table_with_sims(&sims);
        let dist = neg_distribution(&h_c, &table).unwrap();
        let total: f64 = dist.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "sum was {total}");
        assert!(dist.probs().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn max_shift_handles_large_sims() {
        let (h_c, table) = table_with_sims(&[1000.0, 999.0]);
        let dist = neg_distribution(&h_c, &table).unwrap();
        assert!(dist.probs().iter().all(|p| p.is_finite()));
        let ratio = dist.probs()[0] / dist.probs()[1];
        assert!((ratio - 1.0f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn empty_table_is_an_error() {
        let table = EmbeddingTable::new(1);
        let h_c = Embedding::from_values(vec![1.0]);
        assert!(matches!(
            neg_distribution(&h_c, &table),
            Err(SampleError::EmptyTable)
        ));
    }

    #[test]
    fn draws_are_distinct_and_exclude_positive() {
        let (h_c, table) = table_with_sims(&[0.5, 0.4, 0.3, 0.2, 0.1]);
        let dist = neg_distribution(&h_c, &table).unwrap();
        for seed in 0..200 {
            let negs = sample_negatives(&dist, 3, "i2", seed).unwrap();
            assert_eq!(negs.ids.len(), 3);
            assert!(!negs.ids.contains(&"i2".to_string()));
            let mut unique = negs.ids.clone();
            unique.sort();
            unique.dedup();
            assert_eq!(unique.len(), 3);
        }
    }

    #[test]
    fn same_seed_same_draw() {
        let (h_c, table) = table_with_sims(&[0.9, 0.5, 0.1, -0.3]);
        let dist = neg_distribution(&h_c, &table).unwrap();
        let a = sample_negatives(&dist, 2, "i0", 123).unwrap();
        let b = sample_negatives(&dist, 2, "i0", 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn requesting_too_many_negatives_fails() {
        let (h_c, table) = table_with_sims(&[0.1, 0.2]);
        let dist = neg_distribution(&h_c, &table).unwrap();
        let err = sample_negatives(&dist, 2, "i0", 1).unwrap_err();
        assert!(matches!(
            err,
            SampleError::InsufficientItems {
                requested: 2,
                available: 1
            }
        ));
    }

    #[test]
    fn from_probs_validates() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(NegativeDistribution::from_probs(ids.clone(), vec![0.5, 0.5]).is_ok());
        assert!(NegativeDistribution::from_probs(ids.clone(), vec![0.9, 0.2]).is_err());
        assert!(NegativeDistribution::from_probs(ids, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn exclusion_renormalizes_preserving_ratios() {
        // With the positive removed, first-draw frequencies must follow
        // p_i / (1 - p_pos). Checked against 20000 seeded draws.
        let dist = NegativeDistribution::from_probs(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        let mut counts = std::collections::HashMap::new();
        let n = 20_000;
        for seed in 0..n {
            let negs = sample_negatives(&dist, 1, "a", seed).unwrap();
            *counts.entry(negs.ids[0].clone()).or_insert(0usize) += 1;
        }
        let freq_b = counts["b"] as f64 / n as f64;
        let freq_c = counts["c"] as f64 / n as f64;
        assert!((freq_b - 0.6).abs() < 0.02, "b freq {freq_b}");
        assert!((freq_c - 0.4).abs() < 0.02, "c freq {freq_c}");
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sampled_sets_are_valid(
            sims in proptest::collection::vec(-3.0f64..3.0, 3..20),
            k in 1usize..5,
            pos_idx in 0usize..20,
            seed in 0u64..10_000,
        ) {
            let mut table = EmbeddingTable::new(1);
            for (i, s) in sims.iter().enumerate() {
                table.insert(format!("i{i}"), vec![*s as f32]).unwrap();
            }
            let h_c = Embedding::from_values(vec![1.0]);
            let dist = neg_distribution(&h_c, &table).unwrap();
            let positive = format!("i{}", pos_idx % sims.len());
            prop_assume!(k <= sims.len() - 1);
            let negs = sample_negatives(&dist, k, &positive, seed).unwrap();
            prop_assert_eq!(negs.ids.len(), k);
            prop_assert!(!negs.ids.contains(&positive));
            let mut unique = negs.ids.clone();
            unique.sort();
            unique.dedup();
            prop_assert_eq!(unique.len(), k);
        }
    }
}
