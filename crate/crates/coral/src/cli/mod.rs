//! Command-line front end. Eight subcommands drive the pipeline stages;
//! a TOML config file supplies defaults and every flag overrides its
//! config counterpart.
//!
//! Exit codes are fixed for scriptability:
//! 0 success, 2 provider failure (including offline cache misses),
//! 3 response parse failure, 4 configuration problem, 5 malformed data
//! or on-disk format.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, PipelineConfig};

use crate::corpus::CorpusError;
use crate::encoder::StoreError;
use crate::eval::synth::SynthError;
use crate::eval::EvalError;
use crate::expansion::ExpansionError;
use crate::scoring::ScoreError;
use crate::textrep::RenderError;
use crate::trainer::TrainError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROVIDER: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_FORMAT: i32 = 5;

/// Everything a command can fail with, each variant carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    /// Parse failures across many inputs, reported together. The ids go to
    /// stderr so scripts can retry exactly the failing inputs.
    #[error("{count} response(s) failed to parse; ids: {}", ids.join(", "))]
    BatchParse { count: usize, ids: Vec<String> },
    /// Offline run against an incomplete cache.
    #[error("offline mode: {count} prompt(s) had no cached response")]
    OfflineMisses { count: usize },
}

fn corpus_exit_code(e: &CorpusError) -> i32 {
    match e {
        // Unreadable inputs are a configuration problem; unparseable or
        // inconsistent contents are a format problem.
        CorpusError::Io { .. } => EXIT_CONFIG,
        CorpusError::MissingExpansion { .. } => EXIT_CONFIG,
        CorpusError::Parse { .. } => EXIT_FORMAT,
        CorpusError::Validation { .. } => EXIT_FORMAT,
    }
}

fn expansion_exit_code(e: &ExpansionError) -> i32 {
    match e {
        ExpansionError::Provider { .. } => EXIT_PROVIDER,
        ExpansionError::OfflineMiss { .. } => EXIT_PROVIDER,
        ExpansionError::Cache { .. } => EXIT_PROVIDER,
        ExpansionError::Parse { .. } => EXIT_PARSE,
        ExpansionError::MissingBinding { .. } => EXIT_CONFIG,
        ExpansionError::EmptySummary { .. } => EXIT_FORMAT,
        ExpansionError::Render(_) => EXIT_FORMAT,
        ExpansionError::Corpus(inner) => corpus_exit_code(inner),
    }
}

fn train_exit_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Config(_) => EXIT_CONFIG,
        TrainError::Sample(_) => EXIT_CONFIG,
        TrainError::Corpus(inner) => corpus_exit_code(inner),
        TrainError::Render(_) => EXIT_FORMAT,
        TrainError::Score(_) => EXIT_FORMAT,
        TrainError::Store(_) => EXIT_FORMAT,
        TrainError::Metric(_) => EXIT_FORMAT,
        TrainError::Io(_) => EXIT_CONFIG,
    }
}

fn eval_exit_code(e: &EvalError) -> i32 {
    match e {
        EvalError::InvalidK => EXIT_CONFIG,
        EvalError::EmptyGroundTruth { .. } => EXIT_FORMAT,
        EvalError::Corpus(inner) => corpus_exit_code(inner),
        EvalError::Render(_) => EXIT_FORMAT,
        EvalError::Score(_) => EXIT_FORMAT,
        EvalError::Store(_) => EXIT_FORMAT,
        // Training inside an ablation fails on setup problems (bad
        // hyperparameters, too-small catalog), which are configuration.
        EvalError::Train(_) => EXIT_CONFIG,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Expansion(e) => expansion_exit_code(e),
            CliError::Corpus(e) => corpus_exit_code(e),
            CliError::Store(_) => EXIT_FORMAT,
            CliError::Train(e) => train_exit_code(e),
            CliError::Eval(e) => eval_exit_code(e),
            CliError::Score(_) => EXIT_FORMAT,
            CliError::Render(_) => EXIT_FORMAT,
            CliError::Synth(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_CONFIG,
            CliError::BatchParse { .. } => EXIT_PARSE,
            CliError::OfflineMisses { .. } => EXIT_PROVIDER,
        }
    }
}

pub(crate) fn io_ctx(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "coral",
    version,
    about = "Conversational recommendation pipeline: preference expansion, retrieval training, and evaluation"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command that reads the corpus files.
#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    /// Dialogue JSONL file.
    #[arg(long, value_name = "FILE")]
    pub dialogues: Option<PathBuf>,
    /// Item catalog JSONL file.
    #[arg(long, value_name = "FILE")]
    pub items: Option<PathBuf>,
    /// Expansion records JSONL file.
    #[arg(long, value_name = "FILE")]
    pub expansions: Option<PathBuf>,
    /// Item-side expansion products JSONL file (summaries and keyphrases).
    #[arg(long, value_name = "FILE")]
    pub item_prefs: Option<PathBuf>,
}

/// Scoring weight overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ScoringArgs {
    /// Like-term weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dislike-term weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Score with the conversation context only (alpha = beta = 0).
    #[arg(long, default_value_t = false)]
    pub no_prefs: bool,
}

/// Training hyperparameter overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Softmax temperature.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k_negatives: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// "hard" (similarity-sampled) or "in_batch".
    #[arg(long)]
    pub negative_mode: Option<String>,
    /// "separate" (three views) or "concatenated".
    #[arg(long)]
    pub user_mode: Option<String>,
    /// Directory for per-epoch item tables.
    #[arg(long, value_name = "DIR")]
    pub table_dir: Option<PathBuf>,
    /// JSONL dump of last-epoch negative draws.
    #[arg(long, value_name = "FILE")]
    pub negatives_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProviderArgs {
    /// "mock" or "http".
    #[arg(long)]
    pub provider: Option<String>,
    /// Chat-completions endpoint base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Response cache JSONL file.
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    /// Serve everything from the cache; any miss is a failure.
    #[arg(long, default_value_t = false)]
    pub offline: bool,
    /// Worker threads for provider calls.
    #[arg(long, visible_alias = "concurrency")]
    pub jobs: Option<usize>,
    /// Reviews fed to each item summary.
    #[arg(long)]
    pub top_reviews: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand dialogue preferences and item review keyphrases via the
    /// chat provider.
    Expand {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Item reviews JSONL file; items without reviews are passed
        /// through unsummarized.
        #[arg(long, value_name = "FILE")]
        reviews: Option<PathBuf>,
        /// Output path for dialogue expansions.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Output path for item summaries and keyphrases.
        #[arg(long, value_name = "FILE")]
        item_prefs_out: PathBuf,
    },
    /// Train the hashed encoder and write the best checkpoint.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Checkpoint output path.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Training report JSON output path (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Rank the catalog for each dialogue with a trained checkpoint.
    Rank {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Checkpoint to load.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Rankings JSONL output path (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Ranking depth.
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Rank with extracted instead of augmented preferences.
        #[arg(long, default_value_t = false)]
        use_extracted: bool,
    },
    /// Evaluate a checkpoint (or the lexical baseline) with recall and NDCG.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Checkpoint to load (ignored for --ranker bm25).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// "dense" or "bm25".
        #[arg(long, default_value = "dense")]
        ranker: String,
        /// Metric cutoffs.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        /// Evaluate only the held-out validation split for the given seed.
        #[arg(long, default_value_t = false)]
        validation_only: bool,
        /// Split seed for --validation-only.
        #[arg(long)]
        seed: Option<u64>,
        /// Report JSON output path (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Label recorded in the report.
        #[arg(long, default_value = "full")]
        variant: String,
    },
    /// Train and evaluate ablation variants of the full system.
    Ablate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Comma-separated variant labels (default: all).
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
        /// Metric cutoffs.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        /// Report JSON output path (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Score without training: an untrained encoder, or externally
    /// computed embeddings.
    Zeroshot {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Precomputed user vectors JSONL (enables external mode).
        #[arg(long, value_name = "FILE")]
        user_vectors: Option<PathBuf>,
        /// Item embedding table for external mode.
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,
        /// Metric cutoffs.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        /// Report JSON output path (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Label recorded in the report.
        #[arg(long, default_value = "zeroshot")]
        variant: String,
    },
    /// Corpus statistics as JSON.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Generate a synthetic corpus for pipeline tests and benchmarks.
    Synth {
        /// Directory receiving dialogues.jsonl, items.jsonl, and
        /// expansions.jsonl.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long)]
        n_items: Option<usize>,
        #[arg(long)]
        n_attributes: Option<usize>,
        #[arg(long)]
        attrs_per_item: Option<usize>,
        #[arg(long)]
        n_dialogues: Option<usize>,
        /// Probability a dialogue voices a dislike.
        #[arg(long)]
        dislike_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parses arguments and runs the selected command, returning the process
/// exit code. Usage errors are configuration errors; help and version
/// requests succeed.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).expect("parses")
    }

    #[test]
    fn exit_codes_follow_the_documented_map() {
        let provider = CliError::Expansion(ExpansionError::Provider {
            attempts: 3,
            message: "down".into(),
        });
        assert_eq!(provider.exit_code(), EXIT_PROVIDER);
        let miss = CliError::Expansion(ExpansionError::OfflineMiss {
            template: "extract".into(),
            key: "k".into(),
        });
        assert_eq!(miss.exit_code(), EXIT_PROVIDER);
        let parse = CliError::Expansion(ExpansionError::Parse {
            message: "no [Like]".into(),
        });
        assert_eq!(parse.exit_code(), EXIT_PARSE);
        let batch = CliError::BatchParse {
            count: 2,
            ids: vec!["d1".into(), "d2".into()],
        };
        assert_eq!(batch.exit_code(), EXIT_PARSE);
        let missing = CliError::Corpus(CorpusError::Io {
            path: "x.jsonl".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        });
        assert_eq!(missing.exit_code(), EXIT_CONFIG);
        let corrupt = CliError::Store(StoreError::Format {
            message: "bad magic".into(),
        });
        assert_eq!(corrupt.exit_code(), EXIT_FORMAT);
        let bad_line = CliError::Corpus(CorpusError::Parse {
            path: "d.jsonl".into(),
            line: 3,
            message: "not json".into(),
        });
        assert_eq!(bad_line.exit_code(), EXIT_FORMAT);
        let train_cfg = CliError::Train(TrainError::Config("dim must be positive".into()));
        assert_eq!(train_cfg.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn parse_error_lists_every_failing_id() {
        let err = CliError::BatchParse {
            count: 2,
            ids: vec!["dlg00003".into(), "dlg00007".into()],
        };
        let text = err.to_string();
        assert!(text.contains("dlg00003"));
        assert!(text.contains("dlg00007"));
    }

    #[test]
    fn jobs_flag_accepts_concurrency_alias() {
        let cli = parse(&[
            "coral", "expand", "--out", "e.jsonl", "--item-prefs-out", "p.jsonl",
            "--concurrency", "7",
        ]);
        match cli.command {
            Command::Expand { provider, .. } => assert_eq!(provider.jobs, Some(7)),
            _ => panic!("wrong command"),
        }
    }

    #[test]
    fn ks_flag_splits_on_commas() {
        let cli = parse(&["coral", "eval", "--ks", "5,10,50"]);
        match cli.command {
            Command::Eval { ks, .. } => assert_eq!(ks, Some(vec![5, 10, 50])),
            _ => panic!("wrong command"),
        }
    }

    #[test]
    fn config_flag_is_global() {
        let cli = parse(&["coral", "stats", "--config", "pipeline.toml"]);
        assert_eq!(cli.config.as_deref(), Some(std::path::Path::new("pipeline.toml")));
    }
}
