//! Retrieval metrics, the evaluation protocol, ablation variants, and the
//! synthetic corpus generator.
//!
//! Metrics use binary relevance. Recall@k is the fraction of ground-truth
//! items in the top k; NDCG@k discounts hits by 1/log2(rank+1) and
//! normalizes by the ideal DCG for min(|gt|, k) hits. Both are macro-averaged
//! over dialogues. Ground truth is filtered against mentioned items before
//! scoring, and dialogues whose filtered ground truth is empty are skipped
//! and counted.

pub mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{filter_ground_truth, CorpusError, Dialogue, ExpansionSet, ItemCatalog};
use crate::encoder::{build_item_table, EmbeddingTable, HashedEncoder, UserRepresentation};
use crate::scoring::{self, RankedList, ScoringParams};
use crate::textrep::RenderError;
use crate::trainer::{self, TrainConfig, TrainError, UserMode};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ground truth for dialogue {dialogue_id} is empty")]
    EmptyGroundTruth { dialogue_id: String },
    #[error("metric cutoff k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Score(#[from] scoring::ScoreError),
    #[error(transparent)]
    Store(#[from] crate::encoder::StoreError),
    #[error("training failed during ablation: {0}")]
    Train(String),
}

impl From<TrainError> for EvalError {
    fn from(e: TrainError) -> Self {
        EvalError::Train(e.to_string())
    }
}

/// |top-k hits| / |gt|. `gt` must be non-empty and duplicate-free.
pub fn recall_at_k(ranked: &RankedList, gt: &[String], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth {
            dialogue_id: String::new(),
        });
    }
    let gt_set: HashSet<&str> = gt.iter().map(String::as_str).collect();
    let hits = ranked
        .ids()
        .take(k)
        .filter(|id| gt_set.contains(id))
        .count();
    Ok(hits as f64 / gt.len() as f64)
}

/// Binary-relevance NDCG@k: DCG sums 1/log2(rank+1) over hits in the top k,
/// IDCG assumes min(|gt|, k) hits at the top ranks.
pub fn ndcg_at_k(ranked: &RankedList, gt: &[String], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth {
            dialogue_id: String::new(),
        });
    }
    let gt_set: HashSet<&str> = gt.iter().map(String::as_str).collect();
    let mut dcg = 0.0;
    for (idx, id) in ranked.ids().take(k).enumerate() {
        if gt_set.contains(id) {
            dcg += 1.0 / ((idx + 2) as f64).log2();
        }
    }
    let ideal_hits = gt.len().min(k);
    let idcg: f64 = (0..ideal_hits).map(|idx| 1.0 / ((idx + 2) as f64).log2()).sum();
    Ok(dcg / idcg)
}

/// Anything that can produce a ranking for a dialogue.
pub trait Ranker {
    fn rank_dialogue(&self, dialogue: &Dialogue, k: usize) -> Result<RankedList, EvalError>;
}

/// Dense ranker: encodes the dialogue's user views with a (possibly trained)
/// encoder and scores a fixed item table.
pub struct DenseRanker<'a> {
    pub encoder: &'a HashedEncoder,
    pub table: &'a EmbeddingTable,
    pub expansions: &'a ExpansionSet,
    pub params: ScoringParams,
    pub user_mode: UserMode,
    /// Use the extracted preference set instead of the augmented one.
    pub use_extracted: bool,
}

impl Ranker for DenseRanker<'_> {
    fn rank_dialogue(&self, dialogue: &Dialogue, k: usize) -> Result<RankedList, EvalError> {
        let record = self.expansions.require(&dialogue.id)?;
        let prefs = if self.use_extracted {
            &record.extracted
        } else {
            &record.augmented
        };
        let user = trainer::build_user_representation(
            self.encoder,
            dialogue,
            prefs,
            self.user_mode,
        )?;
        Ok(scoring::rank(&user, self.table, &self.params, k)?)
    }
}

/// Ranker over precomputed user vectors, e.g. from an external embedding
/// model. Dialogues without a vector are an error.
pub struct ExternalRanker<'a> {
    pub users: BTreeMap<String, &'a UserRepresentation>,
    pub table: &'a EmbeddingTable,
    pub params: ScoringParams,
}

impl<'a> ExternalRanker<'a> {
    pub fn new(
        users: &'a [UserRepresentation],
        table: &'a EmbeddingTable,
        params: ScoringParams,
    ) -> Self {
        Self {
            users: users.iter().map(|u| (u.dialogue_id.clone(), u)).collect(),
            table,
            params,
        }
    }
}

impl Ranker for ExternalRanker<'_> {
    fn rank_dialogue(&self, dialogue: &Dialogue, k: usize) -> Result<RankedList, EvalError> {
        let user = self.users.get(&dialogue.id).ok_or_else(|| {
            EvalError::Corpus(CorpusError::MissingExpansion {
                dialogue_id: dialogue.id.clone(),
            })
        })?;
        Ok(scoring::rank(user, self.table, &self.params, k)?)
    }
}

/// BM25 ranker over item texts, queried with the rendered conversation.
pub struct Bm25Ranker {
    pub index: scoring::InvertedIndex,
}

impl Bm25Ranker {
    pub fn build(catalog: &ItemCatalog) -> Result<Self, EvalError> {
        let mut docs = Vec::with_capacity(catalog.len());
        for item in catalog.iter() {
            let rendered = crate::textrep::render_item(item)?;
            let tokens = crate::encoder::tokenize(&rendered.text, crate::encoder::DOC_MAX_TOKENS);
            docs.push((item.id.clone(), tokens));
        }
        Ok(Self {
            index: scoring::InvertedIndex::build(docs),
        })
    }
}

impl Ranker for Bm25Ranker {
    fn rank_dialogue(&self, dialogue: &Dialogue, k: usize) -> Result<RankedList, EvalError> {
        let rendered = crate::textrep::render_dialogue(dialogue)?;
        let query = crate::encoder::tokenize(&rendered.text, crate::encoder::DOC_MAX_TOKENS);
        Ok(scoring::bm25_rank(&query, &self.index, k)?)
    }
}

/// Macro-averaged metrics at one cutoff. `None` when no dialogue was
/// evaluable; serialized as JSON null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    /// Keyed by cutoff k.
    pub per_k: BTreeMap<usize, KMetrics>,
}

impl EvalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.per_k.get(&k).and_then(|m| m.recall)
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.per_k.get(&k).and_then(|m| m.ndcg)
    }

    /// CSV with one row per cutoff: variant,k,recall,ndcg,n_evaluated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,k,recall,ndcg,n_evaluated\n");
        for (k, metrics) in &self.per_k {
            let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.variant,
                k,
                fmt(metrics.recall),
                fmt(metrics.ndcg),
                self.n_evaluated
            ));
        }
        out
    }
}

/// Ranks every dialogue once at the largest cutoff and computes
/// macro-averaged Recall@k / NDCG@k for each requested k. Dialogues whose
/// filtered ground truth is empty are skipped and counted in `n_skipped`.
pub fn evaluate<R: Ranker>(
    ranker: &R,
    dialogues: &[Dialogue],
    ks: &[usize],
    variant: &str,
) -> Result<EvalReport, EvalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::InvalidK);
    }
    let max_k = *ks.iter().max().expect("non-empty ks");
    let mut sums: BTreeMap<usize, (f64, f64)> = ks.iter().map(|k| (*k, (0.0, 0.0))).collect();
    let mut n_evaluated = 0usize;
    let mut n_skipped = 0usize;
    for dialogue in dialogues {
        let gt = filter_ground_truth(dialogue);
        if gt.is_empty() {
            n_skipped += 1;
            continue;
        }
        let ranked = ranker.rank_dialogue(dialogue, max_k)?;
        for k in ks {
            let entry = sums.get_mut(k).expect("initialized");
            entry.0 += recall_at_k(&ranked, &gt, *k)?;
            entry.1 += ndcg_at_k(&ranked, &gt, *k)?;
        }
        n_evaluated += 1;
    }
    let per_k = sums
        .into_iter()
        .map(|(k, (recall_sum, ndcg_sum))| {
            let metrics = if n_evaluated == 0 {
                KMetrics {
                    recall: None,
                    ndcg: None,
                }
            } else {
                KMetrics {
                    recall: Some(recall_sum / n_evaluated as f64),
                    ndcg: Some(ndcg_sum / n_evaluated as f64),
                }
            };
            (k, metrics)
        })
        .collect();
    Ok(EvalReport {
        variant: variant.to_string(),
        n_evaluated,
        n_skipped,
        per_k,
    })
}

/// Ablation variants. Each names what is removed from the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full system: augmented preferences, item keyphrases, hard negatives,
    /// separate representations.
    Full,
    /// No like/dislike terms at training or inference.
    NoLd,
    /// Items rendered without review keyphrases.
    NoR,
    /// Both of the above.
    NoLdr,
    /// Extracted preferences instead of augmented ones.
    NoAug,
    /// In-batch negatives instead of similarity-sampled hard negatives.
    NoNeg,
    /// Single concatenated user text instead of three views; trains with
    /// in-batch negatives.
    NoPl,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::NoLd,
        Variant::NoR,
        Variant::NoLdr,
        Variant::NoAug,
        Variant::NoNeg,
        Variant::NoPl,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoLd => "no_ld",
            Variant::NoR => "no_r",
            Variant::NoLdr => "no_ldr",
            Variant::NoAug => "no_aug",
            Variant::NoNeg => "no_neg",
            Variant::NoPl => "no_pl",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.iter().copied().find(|v| v.label() == s)
    }

    fn strips_keyphrases(&self) -> bool {
        matches!(self, Variant::NoR | Variant::NoLdr)
    }

    fn disables_preference_terms(&self) -> bool {
        matches!(self, Variant::NoLd | Variant::NoLdr)
    }

    fn uses_extracted(&self) -> bool {
        matches!(self, Variant::NoAug)
    }

    fn uses_in_batch_negatives(&self) -> bool {
        matches!(self, Variant::NoNeg | Variant::NoPl)
    }

    fn user_mode(&self) -> UserMode {
        match self {
            Variant::NoPl => UserMode::Concatenated,
            _ => UserMode::Separate,
        }
    }
}

/// Catalog copy with review keyphrases removed, for the no-keyphrase
/// variants.
fn strip_keyphrases(catalog: &ItemCatalog) -> ItemCatalog {
    let items = catalog
        .iter()
        .map(|item| {
            let mut item = item.clone();
            item.review_keyphrases = None;
            item
        })
        .collect();
    ItemCatalog::new(items).expect("ids unchanged")
}

/// Expansion set with the augmented field replaced by the extracted one, so
/// downstream consumers see superficial preferences only.
fn demote_to_extracted(expansions: &ExpansionSet) -> ExpansionSet {
    let records = expansions
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.augmented = r.extracted.clone();
            r
        })
        .collect();
    ExpansionSet::new(records)
}

/// Outcome of one ablation run: the trained encoder's evaluation report on
/// the held-out split.
#[derive(Debug)]
pub struct AblationOutcome {
    pub report: EvalReport,
    pub train_report: trainer::TrainReport,
    pub encoder: HashedEncoder,
}

/// Trains and evaluates one ablation variant. The config's scoring flags,
/// negative mode, and user mode are overridden per the variant; catalog and
/// expansions are transformed as needed. Evaluation runs on the validation
/// split with the trained weights.
pub fn run_ablation(
    variant: Variant,
    base_config: &TrainConfig,
    dialogues: &[Dialogue],
    catalog: &ItemCatalog,
    expansions: &ExpansionSet,
    ks: &[usize],
) -> Result<AblationOutcome, EvalError> {
    let mut config = base_config.clone();
    config.user_mode = variant.user_mode();
    if variant.disables_preference_terms() {
        config.scoring.use_like = false;
        config.scoring.use_dislike = false;
    }
    if variant.uses_in_batch_negatives() {
        config.negative_mode = trainer::NegativeMode::InBatch;
    }
    let catalog = if variant.strips_keyphrases() {
        std::borrow::Cow::Owned(strip_keyphrases(catalog))
    } else {
        std::borrow::Cow::Borrowed(catalog)
    };
    let expansions = if variant.uses_extracted() {
        std::borrow::Cow::Owned(demote_to_extracted(expansions))
    } else {
        std::borrow::Cow::Borrowed(expansions)
    };
    let outcome = trainer::train(&config, dialogues, &catalog, &expansions)?;
    let (_, val) = trainer::validation_split(dialogues, config.seed);
    let table = build_item_table(&outcome.encoder, &catalog)?;
    let ranker = DenseRanker {
        encoder: &outcome.encoder,
        table: &table,
        expansions: &expansions,
        params: config.scoring,
        user_mode: config.user_mode,
        use_extracted: false,
    };
    let report = evaluate(&ranker, &val, ks, variant.label())?;
    Ok(AblationOutcome {
        report,
        train_report: outcome.report,
        encoder: outcome.encoder,
    })
}

/// Evaluates an untrained (freshly initialized) encoder, the zero-shot
/// reference point for the trained variants.
pub fn evaluate_zero_shot(
    config: &TrainConfig,
    dialogues: &[Dialogue],
    catalog: &ItemCatalog,
    expansions: &ExpansionSet,
    params: ScoringParams,
    ks: &[usize],
    variant: &str,
) -> Result<EvalReport, EvalError> {
    let encoder = HashedEncoder::new(config.dim, config.buckets, config.seed);
    let table = build_item_table(&encoder, catalog)?;
    let (_, val) = trainer::validation_split(dialogues, config.seed);
    let ranker = DenseRanker {
        encoder: &encoder,
        table: &table,
        expansions,
        params,
        user_mode: UserMode::Separate,
        use_extracted: false,
    };
    evaluate(&ranker, &val, ks, variant)
}

/// Picks the dislike weight from `candidates` that maximizes NDCG@`k` for
/// the given ranker configuration. Ties keep the earliest candidate.
pub fn grid_search_beta(
    encoder: &HashedEncoder,
    table: &EmbeddingTable,
    expansions: &ExpansionSet,
    dialogues: &[Dialogue],
    base: ScoringParams,
    candidates: &[f64],
    k: usize,
) -> Result<(f64, Vec<(f64, EvalReport)>), EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::InvalidK);
    }
    let mut results = Vec::with_capacity(candidates.len());
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &beta in candidates {
        let params = ScoringParams { beta, ..base };
        let ranker = DenseRanker {
            encoder,
            table,
            expansions,
            params,
            user_mode: UserMode::Separate,
            use_extracted: false,
        };
        let report = evaluate(&ranker, dialogues, &[k], &format!("beta_{beta}"))?;
        let ndcg = report.ndcg_at(k).unwrap_or(f64::NEG_INFINITY);
        if ndcg > best.1 {
            best = (beta, ndcg);
        }
        results.push((beta, report));
    }
    Ok((best.0, results))
}
