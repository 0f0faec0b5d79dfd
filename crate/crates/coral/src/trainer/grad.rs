//! Analytic gradients of the contrastive loss through scoring and encoding.
//!
//! The chain is: weight rows -> mean pool -> L2 normalize -> three-term
//! score for each candidate -> temperature softmax cross-entropy. The
//! normalization backprop uses the Jacobian (I - h h^T) / ||o||; mean
//! pooling sends 1/w of the pooled gradient to each kept token's bucket
//! row. Item texts are encoded live here so gradients flow into both the
//! user-side and the item-side of every score.

use std::collections::HashMap;

use crate::encoder::{EncodeTrace, Embedding, HashedEncoder};
use crate::scoring::ScoringParams;
use crate::textrep::SourceKind;

use super::ce_loss_from_scores;

/// One training example, fully described by rendered texts.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub dialogue_id: String,
    pub context_text: String,
    pub like_text: String,
    pub dislike_text: String,
    pub positive_id: String,
    pub positive_text: String,
    /// (item id, rendered text) per negative; duplicates are legal and each
    /// occurrence enters the denominator.
    pub negatives: Vec<(String, String)>,
}

/// Sparse gradient: touched bucket rows only.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    rows: HashMap<usize, Vec<f64>>,
}

impl SparseGrad {
    pub fn rows(&self) -> &HashMap<usize, Vec<f64>> {
        &self.rows
    }

    pub fn row(&self, bucket: usize) -> Option<&[f64]> {
        self.rows.get(&bucket).map(Vec::as_slice)
    }

    fn add_scaled(&mut self, bucket: usize, values: &[f64], scale: f64) {
        let row = self
            .rows
            .entry(bucket)
            .or_insert_with(|| vec![0.0; values.len()]);
        for (r, v) in row.iter_mut().zip(values) {
            *r += scale * v;
        }
    }

    /// Adds `scale * other` into `self`. Bucket rows are disjoint cells, so
    /// the merge order cannot change the result.
    pub fn merge_scaled(&mut self, other: &SparseGrad, scale: f64) {
        for (bucket, values) in &other.rows {
            self.add_scaled(*bucket, values, scale);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Backprop through normalize and mean-pool into the text's bucket rows.
fn backprop_text(trace: &EncodeTrace, g_unit: &[f64], grad: &mut SparseGrad) {
    let h = trace.unit.values();
    let gh_dot_h = dot(g_unit, h);
    let inv_norm = 1.0 / trace.norm;
    let g_pooled: Vec<f64> = g_unit
        .iter()
        .zip(h)
        .map(|(g, hv)| (g - gh_dot_h * hv) * inv_norm)
        .collect();
    let token_share = 1.0 / trace.buckets.len() as f64;
    for &bucket in &trace.buckets {
        grad.add_scaled(bucket, &g_pooled, token_share);
    }
}

struct Forward {
    traces: SampleTraces,
    scores: Vec<f64>,
}

struct SampleTraces {
    context: Option<EncodeTrace>,
    like: Option<EncodeTrace>,
    dislike: Option<EncodeTrace>,
    /// Positive first, then the negatives in sample order.
    candidates: Vec<Option<EncodeTrace>>,
}

fn unit_or_zero(trace: &Option<EncodeTrace>, dim: usize) -> Embedding {
    match trace {
        Some(t) => t.unit.clone(),
        None => Embedding::zeros(dim),
    }
}

fn forward(encoder: &HashedEncoder, sample: &TrainSample, params: &ScoringParams) -> Forward {
    let dim = encoder.dim();
    let traces = SampleTraces {
        context: encoder.encode_traced(&sample.context_text, SourceKind::DialogueCtx),
        like: encoder.encode_traced(&sample.like_text, SourceKind::LikePrefs),
        dislike: encoder.encode_traced(&sample.dislike_text, SourceKind::DislikePrefs),
        candidates: std::iter::once(&sample.positive_text)
            .chain(sample.negatives.iter().map(|(_, text)| text))
            .map(|text| encoder.encode_traced(text, SourceKind::ItemFull))
            .collect(),
    };
    let h_c = unit_or_zero(&traces.context, dim);
    let h_l = unit_or_zero(&traces.like, dim);
    let h_d = unit_or_zero(&traces.dislike, dim);
    let alpha = if params.use_like { params.alpha } else { 0.0 };
    let beta = if params.use_dislike { params.beta } else { 0.0 };
    let scores = traces
        .candidates
        .iter()
        .map(|trace| {
            let h_i = unit_or_zero(trace, dim);
            dot(h_c.values(), h_i.values()) + alpha * dot(h_l.values(), h_i.values())
                - beta * dot(h_d.values(), h_i.values())
        })
        .collect();
    Forward { traces, scores }
}

/// Loss of one sample under the current weights; the forward path of
/// [`loss_gradient`], used directly by finite-difference checks.
pub fn sample_loss(
    encoder: &HashedEncoder,
    sample: &TrainSample,
    params: &ScoringParams,
    tau: f64,
) -> f64 {
    let fwd = forward(encoder, sample, params);
    ce_loss_from_scores(&fwd.scores, 0, tau)
}

/// Loss and exact gradient with respect to every touched weight row.
pub fn loss_gradient(
    encoder: &HashedEncoder,
    sample: &TrainSample,
    params: &ScoringParams,
    tau: f64,
) -> (f64, SparseGrad) {
    let dim = encoder.dim();
    let fwd = forward(encoder, sample, params);
    let loss = ce_loss_from_scores(&fwd.scores, 0, tau);

    // dL/dS_i = (softmax(S/tau)_i - [i == positive]) / tau, max-shifted.
    let max = fwd.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = fwd.scores.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut d_scores: Vec<f64> = exps.iter().map(|e| e / total / tau).collect();
    d_scores[0] -= 1.0 / tau;

    let h_c = unit_or_zero(&fwd.traces.context, dim);
    let h_l = unit_or_zero(&fwd.traces.like, dim);
    let h_d = unit_or_zero(&fwd.traces.dislike, dim);
    let alpha = if params.use_like { params.alpha } else { 0.0 };
    let beta = if params.use_dislike { params.beta } else { 0.0 };

    // dS_i/dh_i is the same combined user vector for every candidate.
    let u_comb: Vec<f64> = (0..dim)
        .map(|j| h_c.values()[j] + alpha * h_l.values()[j] - beta * h_d.values()[j])
        .collect();

    let mut grad = SparseGrad::default();
    // Items: g_{h_i} = dL/dS_i * u_comb. Also accumulate sum_i dL/dS_i * h_i
    // for the user-side gradients.
    let mut items_sum = vec![0.0; dim];
    for (trace, ds) in fwd.traces.candidates.iter().zip(&d_scores) {
        let Some(trace) = trace else { continue };
        for (acc, h) in items_sum.iter_mut().zip(trace.unit.values()) {
            *acc += ds * h;
        }
        let g_item: Vec<f64> = u_comb.iter().map(|u| ds * u).collect();
        backprop_text(trace, &g_item, &mut grad);
    }
    if let Some(trace) = &fwd.traces.context {
        backprop_text(trace, &items_sum, &mut grad);
    }
    if params.use_like {
        if let Some(trace) = &fwd.traces.like {
            let g: Vec<f64> = items_sum.iter().map(|v| alpha * v).collect();
            backprop_text(trace, &g, &mut grad);
        }
    }
    if params.use_dislike {
        if let Some(trace) = &fwd.traces.dislike {
            let g: Vec<f64> = items_sum.iter().map(|v| -beta * v).collect();
            backprop_text(trace, &g, &mut grad);
        }
    }
    (loss, grad)
}

/// Result of comparing the analytic gradient to central finite differences
/// over every touched weight entry.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked_entries: usize,
}

/// Central finite differences at `step` on each touched entry. The relative
/// error denominator is floored at 1e-6 so near-zero entries do not divide
/// noise by noise.
pub fn finite_difference_check(
    encoder: &HashedEncoder,
    sample: &TrainSample,
    params: &ScoringParams,
    tau: f64,
    step: f64,
) -> GradCheck {
    let (_, grad) = loss_gradient(encoder, sample, params, tau);
    let mut scratch = encoder.clone();
    let mut max_rel_err = 0.0f64;
    let mut checked = 0usize;
    let dim = encoder.dim();
    for (&bucket, row) in grad.rows() {
        for j in 0..dim {
            let original = scratch.row(bucket)[j];
            scratch.row_mut(bucket)[j] = original + step;
            let plus = sample_loss(&scratch, sample, params, tau);
            scratch.row_mut(bucket)[j] = original - step;
            let minus = sample_loss(&scratch, sample, params, tau);
            scratch.row_mut(bucket)[j] = original;
            let fd = (plus - minus) / (2.0 * step);
            let analytic = row[j];
            let denom = fd.abs().max(analytic.abs()).max(1e-6);
            let rel = (fd - analytic).abs() / denom;
            if rel > max_rel_err {
                max_rel_err = rel;
            }
            checked += 1;
        }
    }
    GradCheck {
        max_rel_err,
        checked_entries: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand::SeedableRng as _;

    fn sample() -> TrainSample {
        TrainSample {
            dialogue_id: "d".into(),
            context_text: "looking for a scary movie tonight".into(),
            like_text: "ghosts, haunted houses".into(),
            dislike_text: "romance".into(),
            positive_id: "p".into(),
            positive_text: "Title: The Haunting\nGenre: Horror".into(),
            negatives: vec![
                ("n1".into(), "Title: Love Actually\nGenre: Romance".into()),
                ("n2".into(), "Title: Cars\nGenre: Animation".into()),
            ],
        }
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let encoder = HashedEncoder::new(16, 256, 42);
        let check = finite_difference_check(
            &encoder,
            &sample(),
            &ScoringParams::default(),
            0.05,
            1e-5,
        );
        assert!(check.checked_entries > 0);
        assert!(
            check.max_rel_err <= 1e-4,
            "max relative error {}",
            check.max_rel_err
        );
    }

    #[test]
    fn gradient_handles_empty_preference_texts() {
        let encoder = HashedEncoder::new(8, 128, 7);
        let mut s = sample();
        s.like_text.clear();
        s.dislike_text.clear();
        let (loss, grad) = loss_gradient(&encoder, &s, &ScoringParams::default(), 0.05);
        assert!(loss.is_finite());
        let check = finite_difference_check(&encoder, &s, &ScoringParams::default(), 0.05, 1e-5);
        assert!(check.max_rel_err <= 1e-4, "{}", check.max_rel_err);
        // No gradient may flow into preference-only tokens.
        let pref_bucket = encoder.bucket_of("ghosts");
        let touched_by_other = ["looking", "for", "a", "scary", "movie", "tonight", "title",
            "the", "haunting", "genre", "horror", "love", "actually", "romance", "cars",
            "animation"]
            .iter()
            .any(|t| encoder.bucket_of(t) == pref_bucket);
        if !touched_by_other {
            assert!(grad.row(pref_bucket).is_none());
        }
    }

    #[test]
    fn duplicated_negative_doubles_its_softmax_weight() {
        // A duplicated negative candidate must contribute twice through the
        // softmax; verified against finite differences.
        let encoder = HashedEncoder::new(8, 128, 3);
        let mut s = sample();
        s.negatives.push(s.negatives[0].clone());
        let check = finite_difference_check(&encoder, &s, &ScoringParams::default(), 0.1, 1e-5);
        assert!(check.max_rel_err <= 1e-4, "{}", check.max_rel_err);
    }

    #[test]
    fn disabled_terms_have_no_preference_gradient() {
        let encoder = HashedEncoder::new(8, 4096, 5);
        let params = ScoringParams {
            use_like: false,
            use_dislike: false,
            ..ScoringParams::default()
        };
        let (_, grad) = loss_gradient(&encoder, &sample(), &params, 0.05);
        // With both flags off, gradients flow only through context and item
        // tokens; a bucket touched only by "ghosts" must be absent.
        let pref_bucket = encoder.bucket_of("ghosts");
        let other_tokens = ["looking", "for", "a", "scary", "movie", "tonight", "title",
            "the", "haunting", "genre", "horror", "love", "actually", "romance", "cars",
            "animation"];
        if !other_tokens.iter().any(|t| encoder.bucket_of(t) == pref_bucket) {
            assert!(grad.row(pref_bucket).is_none());
        }
        let check = finite_difference_check(&encoder, &sample(), &params, 0.05, 1e-5);
        assert!(check.max_rel_err <= 1e-4, "{}", check.max_rel_err);
    }

    #[test]
    fn random_samples_pass_gradient_check() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..5 {
            let encoder = HashedEncoder::new(12, 512, 1000 + trial);
            let n_negs = rng.random_range(1..4);
            let vocab = ["blue", "хвост", "night", "fast2", "öld", "rain", "dog", "zx"];
            let mut text = |n: usize| {
                (0..n)
                    .map(|_| vocab[rng.random_range(0..vocab.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let s = TrainSample {
                dialogue_id: format!("d{trial}"),
                context_text: text(6),
                like_text: text(3),
                dislike_text: text(2),
                positive_id: "p".into(),
                positive_text: text(5),
                negatives: (0..n_negs)
                    .map(|i| (format!("n{i}"), text(4)))
                    .collect(),
            };
            let check =
                finite_difference_check(&encoder, &s, &ScoringParams::default(), 0.05, 1e-5);
            assert!(
                check.max_rel_err <= 1e-4,
                "trial {trial}: {}",
                check.max_rel_err
            );
        }
    }
}
