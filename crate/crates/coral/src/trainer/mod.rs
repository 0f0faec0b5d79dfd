//! Contrastive training of the hashed encoder.
//!
//! Each epoch freezes the current weights into an item table, draws hard
//! negatives from the similarity softmax over that table, then runs
//! minibatch SGD on the temperature cross-entropy loss. Items inside the
//! loss are re-encoded live so gradients reach them; the frozen table serves
//! sampling only. Validation NDCG@10 on a hashed 10% split drives early
//! stopping, and the best-epoch weights are returned. Every step is seeded,
//! so a fixed seed reproduces the run bit for bit.

pub mod grad;

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    filter_ground_truth, CorpusError, Dialogue, ExpansionSet, ItemCatalog, PreferenceSet,
};
use crate::encoder::{build_item_table, Embedding, HashedEncoder, StoreError, UserRepresentation};
use crate::encoder::fnv1a64;
use crate::eval::{ndcg_at_k, recall_at_k, EvalError};
use crate::sampler::{neg_distribution, sample_negatives, SampleError};
use crate::scoring::{self, ScoreError, ScoringParams};
use crate::textrep::{self, RenderError, SourceKind};

pub use grad::{
    finite_difference_check, loss_gradient, sample_loss, GradCheck, SparseGrad, TrainSample,
};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("metric failure: {0}")]
    Metric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<EvalError> for TrainError {
    fn from(e: EvalError) -> Self {
        TrainError::Metric(e.to_string())
    }
}

/// How negatives enter the loss denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// k similarity-sampled negatives per positive, drawn without
    /// replacement from the frozen epoch-start table.
    Hard,
    /// The other positives of the same minibatch.
    InBatch,
}

/// How the user side is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserMode {
    /// Conversation, like, and dislike views embedded separately.
    Separate,
    /// One concatenated text; preference views stay empty.
    Concatenated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub buckets: usize,
    pub seed: u64,
    /// Softmax temperature of the loss.
    pub tau: f64,
    pub k_negatives: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping; 0 stops
    /// on the first non-improvement.
    pub patience: usize,
    pub scoring: ScoringParams,
    pub negative_mode: NegativeMode,
    pub user_mode: UserMode,
    /// When set, the frozen epoch-start table of each epoch is saved here.
    pub table_dir: Option<PathBuf>,
    /// When set, the final epoch's negative draws are dumped here (hard
    /// mode only).
    pub negatives_dump: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: crate::encoder::DEFAULT_DIM,
            buckets: crate::encoder::DEFAULT_BUCKETS,
            seed: 42,
            tau: 0.05,
            k_negatives: 16,
            learning_rate: 0.1,
            batch_size: 8,
            max_epochs: 30,
            patience: 5,
            scoring: ScoringParams::default(),
            negative_mode: NegativeMode::Hard,
            user_mode: UserMode::Separate,
            table_dir: None,
            negatives_dump: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.dim == 0 || self.buckets == 0 {
            return Err(TrainError::Config("dim and buckets must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(TrainError::Config(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        if self.negative_mode == NegativeMode::Hard && self.k_negatives == 0 {
            return Err(TrainError::Config("k_negatives must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.negative_mode == NegativeMode::InBatch && self.batch_size < 2 {
            return Err(TrainError::Config(
                "in-batch negatives require batch_size of at least 2".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Temperature cross-entropy over one positive and any number of other
/// candidates, computed with the max-shift. `scores[positive_idx]` is the
/// positive; the denominator includes every candidate.
pub fn ce_loss_from_scores(scores: &[f64], positive_idx: usize, tau: f64) -> f64 {
    debug_assert!(positive_idx < scores.len());
    debug_assert!(tau > 0.0);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let logsum: f64 = scores
        .iter()
        .map(|s| ((s - max) / tau).exp())
        .sum::<f64>()
        .ln();
    logsum - (scores[positive_idx] - max) / tau
}

/// Loss of one positive against explicit negative embeddings.
pub fn loss(
    user: &UserRepresentation,
    positive: &Embedding,
    negatives: &[Embedding],
    params: &ScoringParams,
    tau: f64,
) -> Result<f64, TrainError> {
    if !(tau > 0.0) {
        return Err(TrainError::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let mut scores = Vec::with_capacity(1 + negatives.len());
    scores.push(scoring::score(user, positive, params)?);
    for neg in negatives {
        scores.push(scoring::score(user, neg, params)?);
    }
    Ok(ce_loss_from_scores(&scores, 0, tau))
}

/// True when the dialogue falls into the hashed 10% validation split.
pub fn is_validation(dialogue_id: &str, seed: u64) -> bool {
    fnv1a64(&format!("{seed}:split:{dialogue_id}")) % 10 == 0
}

/// Splits dialogues into (train, validation) by seeded id hash.
pub fn validation_split(dialogues: &[Dialogue], seed: u64) -> (Vec<Dialogue>, Vec<Dialogue>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for dialogue in dialogues {
        if is_validation(&dialogue.id, seed) {
            val.push(dialogue.clone());
        } else {
            train.push(dialogue.clone());
        }
    }
    (train, val)
}

/// The three user-side texts for a dialogue under the given mode. In
/// concatenated mode everything lands in the context text and the
/// preference texts are empty.
pub fn build_user_texts(
    dialogue: &Dialogue,
    prefs: &PreferenceSet,
    mode: UserMode,
) -> Result<(String, String, String), RenderError> {
    let context = textrep::render_dialogue(dialogue)?.text;
    let (like, dislike) = textrep::render_preferences(prefs);
    match mode {
        UserMode::Separate => Ok((context, like.text, dislike.text)),
        UserMode::Concatenated => {
            let joined = [context, like.text, dislike.text]
                .into_iter()
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            Ok((joined, String::new(), String::new()))
        }
    }
}

/// Encodes the mode-appropriate user representation.
pub fn build_user_representation(
    encoder: &HashedEncoder,
    dialogue: &Dialogue,
    prefs: &PreferenceSet,
    mode: UserMode,
) -> Result<UserRepresentation, RenderError> {
    let (context, like, dislike) = build_user_texts(dialogue, prefs, mode)?;
    Ok(UserRepresentation {
        dialogue_id: dialogue.id.clone(),
        context: encoder.encode(&context, SourceKind::DialogueCtx),
        like: encoder.encode(&like, SourceKind::LikePrefs),
        dislike: encoder.encode(&dislike, SourceKind::DislikePrefs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_ndcg10: Option<f64>,
    pub val_recall10: Option<f64>,
    /// Wall-clock seconds; excluded from the determinism hash.
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopped { after_epoch: usize },
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRow>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// The early-stopping metric; fixed.
    pub eval_metric: String,
    pub n_train_samples: usize,
    pub n_validation_dialogues: usize,
}

impl TrainReport {
    /// SHA-256 over the deterministic content: everything except wall-clock
    /// times. Two runs with the same seed and inputs hash identically.
    pub fn determinism_hash(&self) -> String {
        let mut shadow = self.clone();
        for row in &mut shadow.epochs {
            row.wall_secs = 0.0;
        }
        let json = serde_json::to_string(&shadow).expect("report serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub encoder: HashedEncoder,
    pub report: TrainReport,
}

/// One line of the negatives audit dump.
#[derive(Debug, Serialize, Deserialize)]
struct NegativesDumpRecord {
    dialogue_id: String,
    negatives: Vec<String>,
}

struct StaticSample {
    dialogue_id: String,
    context_text: String,
    like_text: String,
    dislike_text: String,
    positive_id: String,
}

fn draw_seed(seed: u64, epoch: usize, dialogue_id: &str, positive_id: &str) -> u64 {
    fnv1a64(&format!("{seed}:{epoch}:{dialogue_id}:{positive_id}"))
}

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    fnv1a64(&format!("{seed}:shuffle:{epoch}"))
}

/// Trains the encoder on the given corpus. Dialogues in the validation
/// split are excluded from sample construction; dialogues whose filtered
/// ground truth is empty contribute no samples. One sample is created per
/// (dialogue, filtered ground-truth item) pair.
pub fn train(
    config: &TrainConfig,
    dialogues: &[Dialogue],
    catalog: &ItemCatalog,
    expansions: &ExpansionSet,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if catalog.is_empty() {
        return Err(TrainError::Config("item catalog is empty".into()));
    }
    if config.negative_mode == NegativeMode::Hard && config.k_negatives + 1 > catalog.len() {
        return Err(TrainError::Config(format!(
            "k_negatives = {} needs at least {} catalog items, have {}",
            config.k_negatives,
            config.k_negatives + 1,
            catalog.len()
        )));
    }

    let (train_dialogues, val_dialogues) = validation_split(dialogues, config.seed);
    if train_dialogues.is_empty() {
        return Err(TrainError::Config("no training dialogues after split".into()));
    }

    // Render every item once; samples reference these strings.
    let mut item_texts: HashMap<String, String> = HashMap::with_capacity(catalog.len());
    for item in catalog.iter() {
        item_texts.insert(item.id.clone(), textrep::render_item(item)?.text);
    }

    let mut samples: Vec<StaticSample> = Vec::new();
    for dialogue in &train_dialogues {
        let positives = filter_ground_truth(dialogue);
        if positives.is_empty() {
            continue;
        }
        let record = expansions.require(&dialogue.id)?;
        let (context_text, like_text, dislike_text) =
            build_user_texts(dialogue, &record.augmented, config.user_mode)?;
        for positive_id in positives {
            samples.push(StaticSample {
                dialogue_id: dialogue.id.clone(),
                context_text: context_text.clone(),
                like_text: like_text.clone(),
                dislike_text: dislike_text.clone(),
                positive_id,
            });
        }
    }
    if samples.is_empty() {
        return Err(TrainError::Config(
            "no training samples: every dialogue has empty filtered ground truth".into(),
        ));
    }

    // Validation prerequisites are checked up front so failures surface
    // before a long first epoch.
    for dialogue in &val_dialogues {
        if !filter_ground_truth(dialogue).is_empty() {
            expansions.require(&dialogue.id)?;
        }
    }

    let mut encoder = HashedEncoder::new(config.dim, config.buckets, config.seed);
    let mut report_rows: Vec<EpochRow> = Vec::new();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut bad_streak = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut pending_table: Option<crate::encoder::EmbeddingTable> = None;
    let mut last_epoch_negatives: Vec<NegativesDumpRecord> = Vec::new();

    for epoch in 1..=config.max_epochs {
        let epoch_start = Instant::now();
        let table = match pending_table.take() {
            Some(t) => t,
            None => build_item_table(&encoder, catalog)?,
        };
        if let Some(dir) = &config.table_dir {
            std::fs::create_dir_all(dir)?;
            crate::encoder::save_table(&dir.join(format!("table_epoch_{epoch}.bin")), &table)?;
        }

        // Draw this epoch's negatives from the frozen table.
        let mut epoch_negatives: Vec<Vec<(String, String)>> = Vec::with_capacity(samples.len());
        if config.negative_mode == NegativeMode::Hard {
            let mut dists = HashMap::new();
            for sample in &samples {
                if !dists.contains_key(&sample.dialogue_id) {
                    let h_c = encoder.encode(&sample.context_text, SourceKind::DialogueCtx);
                    dists.insert(sample.dialogue_id.clone(), neg_distribution(&h_c, &table)?);
                }
            }
            last_epoch_negatives.clear();
            for sample in &samples {
                let dist = &dists[&sample.dialogue_id];
                let seed =
                    draw_seed(config.seed, epoch, &sample.dialogue_id, &sample.positive_id);
                let negs = sample_negatives(dist, config.k_negatives, &sample.positive_id, seed)?;
                last_epoch_negatives.push(NegativesDumpRecord {
                    dialogue_id: sample.dialogue_id.clone(),
                    negatives: negs.ids.clone(),
                });
                epoch_negatives.push(
                    negs.ids
                        .into_iter()
                        .map(|id| {
                            let text = item_texts[&id].clone();
                            (id, text)
                        })
                        .collect(),
                );
            }
        } else {
            epoch_negatives.resize(samples.len(), Vec::new());
        }

        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(config.seed, epoch)));

        let mut loss_sum = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let mut batch_grad = SparseGrad::default();
            for &idx in batch {
                let s = &samples[idx];
                let negatives = match config.negative_mode {
                    NegativeMode::Hard => epoch_negatives[idx].clone(),
                    NegativeMode::InBatch => batch
                        .iter()
                        .filter(|&&other| other != idx)
                        .map(|&other| &samples[other])
                        .filter(|other| other.positive_id != s.positive_id)
                        .map(|other| {
                            (
                                other.positive_id.clone(),
                                item_texts[&other.positive_id].clone(),
                            )
                        })
                        .collect(),
                };
                let sample = TrainSample {
                    dialogue_id: s.dialogue_id.clone(),
                    context_text: s.context_text.clone(),
                    like_text: s.like_text.clone(),
                    dislike_text: s.dislike_text.clone(),
                    positive_id: s.positive_id.clone(),
                    positive_text: item_texts[&s.positive_id].clone(),
                    negatives,
                };
                let (loss_value, grad) =
                    loss_gradient(&encoder, &sample, &config.scoring, config.tau);
                loss_sum += loss_value;
                batch_grad.merge_scaled(&grad, 1.0 / batch.len() as f64);
            }
            for (&bucket, row) in batch_grad.rows() {
                let weights = encoder.row_mut(bucket);
                for (w, g) in weights.iter_mut().zip(row) {
                    *w -= config.learning_rate * g;
                }
            }
        }
        let mean_loss = loss_sum / samples.len() as f64;

        // Validate on the post-update weights; the fresh table doubles as
        // the next epoch's frozen snapshot.
        let val_table = build_item_table(&encoder, catalog)?;
        let (val_ndcg10, val_recall10) =
            validate(&encoder, &val_table, &val_dialogues, expansions, config)?;
        pending_table = Some(val_table);

        report_rows.push(EpochRow {
            epoch,
            mean_loss,
            val_ndcg10,
            val_recall10,
            wall_secs: epoch_start.elapsed().as_secs_f64(),
        });

        if let Some(ndcg) = val_ndcg10 {
            let improved = best.as_ref().map_or(true, |(_, best_ndcg, _)| ndcg > *best_ndcg);
            if improved {
                best = Some((epoch, ndcg, encoder.weights().to_vec()));
                bad_streak = 0;
            } else {
                bad_streak += 1;
                if bad_streak > config.patience {
                    stop_reason = StopReason::EarlyStopped { after_epoch: epoch };
                    break;
                }
            }
        } else {
            // No validation signal: keep the latest weights as best.
            best = Some((epoch, f64::NEG_INFINITY, encoder.weights().to_vec()));
        }
    }

    let (best_epoch, _, best_weights) = best.expect("at least one epoch ran");
    let encoder = HashedEncoder::from_weights(config.dim, config.buckets, best_weights);

    if let (Some(path), NegativeMode::Hard) = (&config.negatives_dump, config.negative_mode) {
        crate::corpus::save_jsonl(path, &last_epoch_negatives)?;
    }

    let report = TrainReport {
        epochs: report_rows,
        best_epoch,
        stop_reason,
        eval_metric: "ndcg@10".into(),
        n_train_samples: samples.len(),
        n_validation_dialogues: val_dialogues.len(),
    };
    Ok(TrainOutcome { encoder, report })
}

/// Macro-averaged NDCG@10 and Recall@10 over evaluable validation
/// dialogues; None when nothing is evaluable.
fn validate(
    encoder: &HashedEncoder,
    table: &crate::encoder::EmbeddingTable,
    val_dialogues: &[Dialogue],
    expansions: &ExpansionSet,
    config: &TrainConfig,
) -> Result<(Option<f64>, Option<f64>), TrainError> {
    let mut ndcg_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut n = 0usize;
    for dialogue in val_dialogues {
        let gt = filter_ground_truth(dialogue);
        if gt.is_empty() {
            continue;
        }
        let record = expansions.require(&dialogue.id)?;
        let user = build_user_representation(encoder, dialogue, &record.augmented, config.user_mode)?;
        let ranked = scoring::rank(&user, table, &config.scoring, 10)?;
        ndcg_sum += ndcg_at_k(&ranked, &gt, 10).map_err(TrainError::from)?;
        recall_sum += recall_at_k(&ranked, &gt, 10).map_err(TrainError::from)?;
        n += 1;
    }
    if n == 0 {
        Ok((None, None))
    } else {
        Ok((Some(ndcg_sum / n as f64), Some(recall_sum / n as f64)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_scores_give_ln_candidate_count() {
        // 1 positive + 3 negatives, all scores equal: loss = ln 4.
        let scores = [0.7; 4];
        let loss = ce_loss_from_scores(&scores, 0, 0.05);
        assert!((loss - 4.0f64.ln()).abs() < 1e-9);
        // And generally ln(1 + k) for k equal negatives.
        for k in 1..10 {
            let scores = vec![-1.3; k + 1];
            let loss = ce_loss_from_scores(&scores, 0, 1.7);
            assert!((loss - ((k + 1) as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn one_nat_margin_headline_value() {
        // Positive 1.0, single negative 0.0 at tau = 1: ln(1 + e^-1).
        let loss = ce_loss_from_scores(&[1.0, 0.0], 0, 1.0);
        assert!((loss - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-9);
        assert!((loss - 0.3132616875182228).abs() < 1e-9);
    }

    #[test]
    fn loss_is_positive_with_any_negative_present() {
        let scores = [5.0, -2.0, 1.0];
        assert!(ce_loss_from_scores(&scores, 0, 1.0) > 0.0);
        // At tau = 0.05 the 4-point margin drives the loss below f64
        // resolution; it underflows to exactly 0 rather than negative.
        assert!(ce_loss_from_scores(&scores, 0, 0.05) >= 0.0);
    }

    #[test]
    fn scaling_scores_and_tau_together_is_invariant() {
        let scores = [0.9, 0.1, -0.4, 0.3];
        let base = ce_loss_from_scores(&scores, 0, 0.05);
        for c in [2.0, 10.0, 0.5] {
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            let loss = ce_loss_from_scores(&scaled, 0, 0.05 * c);
            assert!((loss - base).abs() < 1e-9, "c={c}: {loss} vs {base}");
        }
    }

    #[test]
    fn max_shift_survives_extreme_scores() {
        let loss = ce_loss_from_scores(&[1000.0, 999.0, 998.0], 0, 1.0);
        assert!(loss.is_finite());
        let reference = ce_loss_from_scores(&[2.0, 1.0, 0.0], 0, 1.0);
        assert!((loss - reference).abs() < 1e-9);
    }

    #[test]
    fn loss_op_validates_tau() {
        let user = UserRepresentation {
            dialogue_id: "d".into(),
            context: Embedding::from_values(vec![1.0, 0.0]),
            like: Embedding::zeros(2),
            dislike: Embedding::zeros(2),
        };
        let pos = Embedding::from_values(vec![1.0, 0.0]);
        let err = loss(&user, &pos, &[], &ScoringParams::default(), 0.0).unwrap_err();
        assert!(matches!(err, TrainError::Config(_)));
        let ok = loss(&user, &pos, &[], &ScoringParams::default(), 0.05).unwrap();
        // Sole candidate: softmax probability 1, loss 0.
        assert!(ok.abs() < 1e-12);
    }

    #[test]
    fn split_is_roughly_ten_percent_and_deterministic() {
        let dialogues: Vec<Dialogue> = (0..1000)
            .map(|i| Dialogue {
                id: format!("d{i}"),
                turns: vec![crate::corpus::Utterance {
                    speaker: crate::corpus::Speaker::User,
                    text: "hi".into(),
                }],
                ground_truth: vec![],
                mentioned_items: vec![],
            })
            .collect();
        let (train_a, val_a) = validation_split(&dialogues, 7);
        let (train_b, val_b) = validation_split(&dialogues, 7);
        assert_eq!(train_a, train_b);
        assert_eq!(val_a, val_b);
        let frac = val_a.len() as f64 / dialogues.len() as f64;
        assert!((0.05..0.15).contains(&frac), "split fraction {frac}");
        // A different seed produces a different split.
        let (_, val_c) = validation_split(&dialogues, 8);
        assert_ne!(
            val_a.iter().map(|d| &d.id).collect::<Vec<_>>(),
            val_c.iter().map(|d| &d.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn concatenated_mode_folds_preferences_into_context() {
        let dialogue = Dialogue {
            id: "d".into(),
            turns: vec![crate::corpus::Utterance {
                speaker: crate::corpus::Speaker::User,
                text: "hello".into(),
            }],
            ground_truth: vec![],
            mentioned_items: vec![],
        };
        let prefs = PreferenceSet::new(vec!["space opera".into()], vec!["gore".into()]);
        let (ctx, like, dislike) =
            build_user_texts(&dialogue, &prefs, UserMode::Concatenated).unwrap();
        assert_eq!(ctx, "[User] hello space opera gore");
        assert!(like.is_empty() && dislike.is_empty());
        let (ctx_sep, like_sep, dislike_sep) =
            build_user_texts(&dialogue, &prefs, UserMode::Separate).unwrap();
        assert_eq!(ctx_sep, "[User] hello");
        assert_eq!(like_sep, "space opera");
        assert_eq!(dislike_sep, "gore");
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = TrainConfig::default();
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.k_negatives = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig {
            negative_mode: NegativeMode::InBatch,
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.batch_size = 2;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn determinism_hash_ignores_wall_time() {
        let mut a = TrainReport {
            epochs: vec![EpochRow {
                epoch: 1,
                mean_loss: 1.25,
                val_ndcg10: Some(0.5),
                val_recall10: Some(0.4),
                wall_secs: 3.2,
            }],
            best_epoch: 1,
            stop_reason: StopReason::MaxEpochs,
            eval_metric: "ndcg@10".into(),
            n_train_samples: 10,
            n_validation_dialogues: 2,
        };
        let h1 = a.determinism_hash();
        a.epochs[0].wall_secs = 99.0;
        assert_eq!(h1, a.determinism_hash());
        a.epochs[0].mean_loss = 1.26;
        assert_ne!(h1, a.determinism_hash());
    }
}
