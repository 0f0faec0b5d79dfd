//! Implementations behind the subcommands. Each one resolves its inputs
//! from flags over the config file, runs the library call, and writes the
//! requested outputs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::config::{override_field, require_input, resolve_path, PipelineConfig};
use crate::cli::{
    Cli, CliError, Command, CorpusArgs, ProviderArgs, ScoringArgs, TrainArgs,
};
use crate::corpus::{
    self, Dialogue, ExpansionRecord, ExpansionSet, ItemCatalog,
};
use crate::encoder::{
    build_item_table, load_checkpoint, load_table, load_user_vectors, save_checkpoint,
    HashedEncoder,
};
use crate::eval::{
    evaluate, synth, Bm25Ranker, DenseRanker, EvalReport, ExternalRanker, Ranker, Variant,
};
use crate::expansion::{
    load_reviews, ChatProvider, Expander, ExpansionCache, ExpansionError, HttpProvider,
    ItemPrefRecord, MockProvider,
};
use crate::scoring::ScoringParams;
use crate::trainer::{self, TrainConfig, UserMode};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Expand {
            corpus,
            provider,
            reviews,
            out,
            item_prefs_out,
        } => cmd_expand(&config, corpus, provider, reviews, out, item_prefs_out),
        Command::Train {
            corpus,
            train,
            scoring,
            checkpoint,
            report,
        } => cmd_train(&config, corpus, train, scoring, checkpoint, report),
        Command::Rank {
            corpus,
            scoring,
            checkpoint,
            out,
            k,
            use_extracted,
        } => cmd_rank(&config, corpus, scoring, checkpoint, out, k, use_extracted),
        Command::Eval {
            corpus,
            scoring,
            checkpoint,
            ranker,
            ks,
            validation_only,
            seed,
            report,
            variant,
        } => cmd_eval(
            &config, corpus, scoring, checkpoint, &ranker, ks, validation_only, seed, report,
            &variant,
        ),
        Command::Ablate {
            corpus,
            train,
            scoring,
            variants,
            ks,
            report,
        } => cmd_ablate(&config, corpus, train, scoring, variants, ks, report),
        Command::Zeroshot {
            corpus,
            scoring,
            train,
            user_vectors,
            table,
            ks,
            report,
            variant,
        } => cmd_zeroshot(
            &config, corpus, scoring, train, user_vectors, table, ks, report, &variant,
        ),
        Command::Stats { corpus } => cmd_stats(&config, corpus),
        Command::Synth {
            out_dir,
            n_items,
            n_attributes,
            attrs_per_item,
            n_dialogues,
            dislike_rate,
            seed,
        } => cmd_synth(
            out_dir,
            n_items,
            n_attributes,
            attrs_per_item,
            n_dialogues,
            dislike_rate,
            seed,
        ),
    }
}

/// Flag-over-config resolution for the scoring weights.
fn resolve_scoring(config: &PipelineConfig, flags: &ScoringArgs) -> ScoringParams {
    if flags.no_prefs {
        return ScoringParams::context_only();
    }
    let mut params = config.scoring.params();
    override_field(&mut params.alpha, flags.alpha);
    override_field(&mut params.beta, flags.beta);
    params
}

/// Flag-over-config resolution for the trainer.
fn resolve_train(
    config: &PipelineConfig,
    flags: &TrainArgs,
    scoring: ScoringParams,
) -> Result<TrainConfig, CliError> {
    let mut section = config.train.clone();
    override_field(&mut section.dim, flags.dim);
    override_field(&mut section.buckets, flags.buckets);
    override_field(&mut section.seed, flags.seed);
    override_field(&mut section.tau, flags.tau);
    override_field(&mut section.k_negatives, flags.k_negatives);
    override_field(&mut section.learning_rate, flags.learning_rate);
    override_field(&mut section.batch_size, flags.batch_size);
    override_field(&mut section.max_epochs, flags.max_epochs);
    override_field(&mut section.patience, flags.patience);
    override_field(&mut section.negative_mode, flags.negative_mode.clone());
    override_field(&mut section.user_mode, flags.user_mode.clone());
    if flags.table_dir.is_some() {
        section.table_dir = flags.table_dir.clone();
    }
    if flags.negatives_dump.is_some() {
        section.negatives_dump = flags.negatives_dump.clone();
    }
    Ok(section.train_config(scoring)?)
}

fn resolve_ks(config: &PipelineConfig, flags: Option<Vec<usize>>) -> Vec<usize> {
    flags.unwrap_or_else(|| config.eval.ks.clone())
}

struct LoadedCorpus {
    catalog: ItemCatalog,
    dialogues: Vec<Dialogue>,
}

/// Loads catalog and dialogues, applying item-side expansion products when
/// an item_prefs path is available.
fn load_corpus(config: &PipelineConfig, args: &CorpusArgs) -> Result<LoadedCorpus, CliError> {
    let items = resolve_path(args.items.clone(), &config.paths.items, "items")?;
    let dialogues = resolve_path(args.dialogues.clone(), &config.paths.dialogues, "dialogues")?;
    require_input(&items, "items")?;
    require_input(&dialogues, "dialogues")?;
    let mut catalog = corpus::load_items(&items)?;
    let loaded = corpus::load_dialogues(&dialogues, &catalog)?;
    let item_prefs = args
        .item_prefs
        .clone()
        .or_else(|| config.paths.item_prefs.clone());
    if let Some(path) = item_prefs {
        require_input(&path, "item_prefs")?;
        let records = load_item_prefs(&path)?;
        crate::expansion::apply_item_prefs(&mut catalog, &records)?;
    }
    Ok(LoadedCorpus {
        catalog,
        dialogues: loaded,
    })
}

fn load_item_prefs(path: &Path) -> Result<Vec<ItemPrefRecord>, CliError> {
    let rows: Vec<(usize, ItemPrefRecord)> = corpus::read_jsonl(path)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

fn load_expansion_set(config: &PipelineConfig, args: &CorpusArgs) -> Result<ExpansionSet, CliError> {
    let path = resolve_path(args.expansions.clone(), &config.paths.expansions, "expansions")?;
    require_input(&path, "expansions")?;
    Ok(corpus::load_expansions(&path)?)
}

/// Writes a serializable value as pretty JSON to the path, or stdout when
/// no path is given.
fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        context: "serialize report".to_string(),
        source: std::io::Error::other(e),
    })?;
    match path {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(crate::cli::io_ctx(format!("write {}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn build_provider(
    config: &PipelineConfig,
    flags: &ProviderArgs,
) -> Result<Box<dyn ChatProvider>, CliError> {
    let mut section = config.provider.clone();
    override_field(&mut section.kind, flags.provider.clone());
    override_field(&mut section.endpoint, flags.endpoint.clone());
    override_field(&mut section.model, flags.model.clone());
    override_field(&mut section.temperature, flags.temperature);
    match section.kind.as_str() {
        "mock" => Ok(Box::new(MockProvider)),
        "http" => Ok(Box::new(HttpProvider::new(section.provider_config())?)),
        other => Err(CliError::Config(crate::cli::ConfigError::Invalid(format!(
            "provider kind must be \"mock\" or \"http\", got {other:?}"
        )))),
    }
}

/// Folds per-input expansion failures into one error. Provider and cache
/// failures dominate, then offline misses (with a count), then parse
/// failures (all ids listed); anything else surfaces as-is in input order.
fn classify_failures<T>(
    results: Vec<(String, Result<T, ExpansionError>)>,
) -> Result<Vec<T>, CliError> {
    let mut ok = Vec::with_capacity(results.len());
    let mut provider_err: Option<ExpansionError> = None;
    let mut misses = 0usize;
    let mut parse_ids: Vec<String> = Vec::new();
    let mut other: Option<ExpansionError> = None;
    for (id, result) in results {
        match result {
            Ok(value) => ok.push(value),
            Err(e @ (ExpansionError::Provider { .. } | ExpansionError::Cache { .. })) => {
                provider_err.get_or_insert(e);
            }
            Err(ExpansionError::OfflineMiss { .. }) => misses += 1,
            Err(ExpansionError::Parse { .. }) => parse_ids.push(id),
            Err(e) => {
                other.get_or_insert(e);
            }
        }
    }
    if let Some(e) = provider_err {
        return Err(e.into());
    }
    if misses > 0 {
        return Err(CliError::OfflineMisses { count: misses });
    }
    if !parse_ids.is_empty() {
        return Err(CliError::BatchParse {
            count: parse_ids.len(),
            ids: parse_ids,
        });
    }
    if let Some(e) = other {
        return Err(e.into());
    }
    Ok(ok)
}

fn cmd_expand(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    provider_args: ProviderArgs,
    reviews: Option<PathBuf>,
    out: PathBuf,
    item_prefs_out: PathBuf,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let provider = build_provider(config, &provider_args)?;
    let cache_path = provider_args
        .cache
        .clone()
        .or_else(|| config.paths.cache.clone());
    let cache = match &cache_path {
        Some(path) => Some(ExpansionCache::open(path)?),
        None => None,
    };
    if provider_args.offline && cache.is_none() {
        return Err(CliError::Config(crate::cli::ConfigError::Invalid(
            "--offline requires a cache path".to_string(),
        )));
    }
    let expander = Expander {
        provider: provider.as_ref(),
        cache: cache.as_ref(),
        offline: provider_args.offline,
    };
    let jobs = provider_args
        .jobs
        .unwrap_or(config.provider.concurrency)
        .max(1);
    let top_reviews = provider_args
        .top_reviews
        .unwrap_or(config.provider.top_reviews);

    // Collect one result per input so misses and parse failures can be
    // reported in aggregate instead of stopping at the first one.
    let dialogue_results: Vec<(String, Result<ExpansionRecord, ExpansionError>)> =
        expand_dialogues_collect(&expander, &loaded.dialogues, jobs)?;
    let records = classify_failures(dialogue_results)?;

    let reviews_path = reviews.or_else(|| config.paths.reviews.clone());
    let review_map = match &reviews_path {
        Some(path) => {
            require_input(path, "reviews")?;
            load_reviews(path)?
        }
        None => HashMap::new(),
    };
    let item_results = expand_items_collect(&expander, &loaded.catalog, &review_map, top_reviews, jobs)?;
    let item_records = classify_failures(item_results)?;

    corpus::save_jsonl(&out, &records)?;
    corpus::save_jsonl(&item_prefs_out, &item_records)?;
    println!(
        "expanded {} dialogue(s) and {} item(s)",
        records.len(),
        item_records.len()
    );
    Ok(())
}

/// Like [`expand_dialogues`] but yields per-dialogue results; only thread
/// plumbing can fail.
fn expand_dialogues_collect(
    expander: &Expander,
    dialogues: &[Dialogue],
    jobs: usize,
) -> Result<Vec<(String, Result<ExpansionRecord, ExpansionError>)>, CliError> {
    // The inner closure is infallible, so the outer parallel map never errors.
    let results = crate::expansion::run_parallel(jobs, dialogues, |d| {
        Ok((d.id.clone(), expander.expand_dialogue(d)))
    })
    .expect("collection closure is infallible");
    Ok(results)
}

fn expand_items_collect(
    expander: &Expander,
    catalog: &ItemCatalog,
    reviews: &HashMap<String, Vec<String>>,
    top_j: usize,
    jobs: usize,
) -> Result<Vec<(String, Result<ItemPrefRecord, ExpansionError>)>, CliError> {
    let items: Vec<&corpus::ItemRecord> = catalog.iter().collect();
    let results = crate::expansion::run_parallel(jobs, &items, |item| {
        let item_reviews = reviews.get(&item.id).map(Vec::as_slice).unwrap_or(&[]);
        Ok((item.id.clone(), expander.expand_item(item, item_reviews, top_j)))
    })
    .expect("collection closure is infallible");
    Ok(results)
}

fn cmd_train(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    train_args: TrainArgs,
    scoring_args: ScoringArgs,
    checkpoint: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let expansions = load_expansion_set(config, &corpus_args)?;
    let scoring = resolve_scoring(config, &scoring_args);
    let train_config = resolve_train(config, &train_args, scoring)?;
    let checkpoint_path = resolve_path(checkpoint, &config.paths.checkpoint, "checkpoint")?;

    let outcome = trainer::train(&train_config, &loaded.dialogues, &loaded.catalog, &expansions)?;
    let table = build_item_table(&outcome.encoder, &loaded.catalog)?;
    save_checkpoint(&checkpoint_path, &table, &outcome.encoder)?;
    write_json(&outcome.report, report.as_deref())?;
    eprintln!(
        "trained {} epoch(s); best epoch {}; checkpoint {}; report hash {}",
        outcome.report.epochs.len(),
        outcome.report.best_epoch,
        checkpoint_path.display(),
        outcome.report.determinism_hash()
    );
    Ok(())
}

/// One rankings line: the dialogue and its scored items, best first.
#[derive(Debug, Serialize)]
struct RankingRow<'a> {
    dialogue_id: &'a str,
    ranking: &'a [crate::scoring::RankedEntry],
}

fn cmd_rank(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    scoring_args: ScoringArgs,
    checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
    k: usize,
    use_extracted: bool,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let expansions = load_expansion_set(config, &corpus_args)?;
    let checkpoint_path = resolve_path(checkpoint, &config.paths.checkpoint, "checkpoint")?;
    require_input(&checkpoint_path, "checkpoint")?;
    let (table, encoder) = load_checkpoint(&checkpoint_path)?;
    let params = resolve_scoring(config, &scoring_args);
    let ranker = DenseRanker {
        encoder: &encoder,
        table: &table,
        expansions: &expansions,
        params,
        user_mode: UserMode::Separate,
        use_extracted,
    };
    let mut lines = Vec::with_capacity(loaded.dialogues.len());
    for dialogue in &loaded.dialogues {
        let ranking = ranker.rank_dialogue(dialogue, k)?;
        let row = RankingRow {
            dialogue_id: &dialogue.id,
            ranking: &ranking.entries,
        };
        lines.push(serde_json::to_string(&row).map_err(|e| CliError::Io {
            context: "serialize ranking".to_string(),
            source: std::io::Error::other(e),
        })?);
    }
    match &out {
        Some(path) => {
            let body = lines.join("\n") + "\n";
            std::fs::write(path, body)
                .map_err(crate::cli::io_ctx(format!("write {}", path.display())))?;
            eprintln!("ranked {} dialogue(s) to {}", lines.len(), path.display());
        }
        None => {
            for line in &lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    scoring_args: ScoringArgs,
    checkpoint: Option<PathBuf>,
    ranker_kind: &str,
    ks: Option<Vec<usize>>,
    validation_only: bool,
    seed: Option<u64>,
    report_path: Option<PathBuf>,
    variant: &str,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let ks = resolve_ks(config, ks);
    let eval_dialogues: Vec<Dialogue> = if validation_only {
        let seed = seed.unwrap_or(config.train.seed);
        let (_, val) = trainer::validation_split(&loaded.dialogues, seed);
        val
    } else {
        loaded.dialogues.clone()
    };
    let report = match ranker_kind {
        "bm25" => {
            let ranker = Bm25Ranker::build(&loaded.catalog)?;
            evaluate(&ranker, &eval_dialogues, &ks, variant)?
        }
        "dense" => {
            let expansions = load_expansion_set(config, &corpus_args)?;
            let checkpoint_path =
                resolve_path(checkpoint, &config.paths.checkpoint, "checkpoint")?;
            require_input(&checkpoint_path, "checkpoint")?;
            let (table, encoder) = load_checkpoint(&checkpoint_path)?;
            let params = resolve_scoring(config, &scoring_args);
            let ranker = DenseRanker {
                encoder: &encoder,
                table: &table,
                expansions: &expansions,
                params,
                user_mode: UserMode::Separate,
                use_extracted: false,
            };
            evaluate(&ranker, &eval_dialogues, &ks, variant)?
        }
        other => {
            return Err(CliError::Config(crate::cli::ConfigError::Invalid(format!(
                "ranker must be \"dense\" or \"bm25\", got {other:?}"
            ))))
        }
    };
    write_json(&report, report_path.as_deref())?;
    eprint!("{}", report.to_csv());
    Ok(())
}

/// One ablation row in the report JSON.
#[derive(Debug, Serialize)]
struct AblationRow {
    variant: String,
    report: EvalReport,
    best_epoch: usize,
    n_epochs: usize,
}

fn cmd_ablate(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    train_args: TrainArgs,
    scoring_args: ScoringArgs,
    variants: Option<Vec<String>>,
    ks: Option<Vec<usize>>,
    report_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let expansions = load_expansion_set(config, &corpus_args)?;
    let scoring = resolve_scoring(config, &scoring_args);
    let train_config = resolve_train(config, &train_args, scoring)?;
    let ks = resolve_ks(config, ks);
    let selected: Vec<Variant> = match variants {
        Some(labels) => labels
            .iter()
            .map(|label| {
                Variant::parse(label).ok_or_else(|| {
                    CliError::Config(crate::cli::ConfigError::Invalid(format!(
                        "unknown ablation variant {label:?}"
                    )))
                })
            })
            .collect::<Result<_, _>>()?,
        None => Variant::ALL.to_vec(),
    };
    let mut rows = Vec::with_capacity(selected.len());
    for variant in selected {
        let outcome = crate::eval::run_ablation(
            variant,
            &train_config,
            &loaded.dialogues,
            &loaded.catalog,
            &expansions,
            &ks,
        )?;
        eprint!("{}", outcome.report.to_csv());
        rows.push(AblationRow {
            variant: variant.label().to_string(),
            report: outcome.report,
            best_epoch: outcome.train_report.best_epoch,
            n_epochs: outcome.train_report.epochs.len(),
        });
    }
    write_json(&rows, report_path.as_deref())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_zeroshot(
    config: &PipelineConfig,
    corpus_args: CorpusArgs,
    scoring_args: ScoringArgs,
    train_args: TrainArgs,
    user_vectors: Option<PathBuf>,
    table: Option<PathBuf>,
    ks: Option<Vec<usize>>,
    report_path: Option<PathBuf>,
    variant: &str,
) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let params = resolve_scoring(config, &scoring_args);
    let ks = resolve_ks(config, ks);
    let report = match (user_vectors, table) {
        (Some(vectors_path), Some(table_path)) => {
            require_input(&vectors_path, "user_vectors")?;
            require_input(&table_path, "table")?;
            let users = load_user_vectors(&vectors_path)?;
            let table = load_table(&table_path)?;
            let ranker = ExternalRanker::new(&users, &table, params);
            evaluate(&ranker, &loaded.dialogues, &ks, variant)?
        }
        (None, None) => {
            let expansions = load_expansion_set(config, &corpus_args)?;
            let train_config = resolve_train(config, &train_args, params)?;
            let encoder =
                HashedEncoder::new(train_config.dim, train_config.buckets, train_config.seed);
            let table = build_item_table(&encoder, &loaded.catalog)?;
            let ranker = DenseRanker {
                encoder: &encoder,
                table: &table,
                expansions: &expansions,
                params,
                user_mode: UserMode::Separate,
                use_extracted: false,
            };
            evaluate(&ranker, &loaded.dialogues, &ks, variant)?
        }
        _ => {
            return Err(CliError::Config(crate::cli::ConfigError::Invalid(
                "external mode needs both --user-vectors and --table".to_string(),
            )))
        }
    };
    write_json(&report, report_path.as_deref())?;
    eprint!("{}", report.to_csv());
    Ok(())
}

fn cmd_stats(config: &PipelineConfig, corpus_args: CorpusArgs) -> Result<(), CliError> {
    let loaded = load_corpus(config, &corpus_args)?;
    let expansions = load_expansion_set(config, &corpus_args)?;
    let stats = corpus::stats(&loaded.dialogues, &loaded.catalog, &expansions)?;
    write_json(&stats, None)?;
    Ok(())
}

fn cmd_synth(
    out_dir: PathBuf,
    n_items: Option<usize>,
    n_attributes: Option<usize>,
    attrs_per_item: Option<usize>,
    n_dialogues: Option<usize>,
    dislike_rate: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut synth_config = synth::SynthConfig::default();
    override_field(&mut synth_config.n_items, n_items);
    override_field(&mut synth_config.n_attributes, n_attributes);
    override_field(&mut synth_config.attrs_per_item, attrs_per_item);
    override_field(&mut synth_config.n_dialogues, n_dialogues);
    override_field(&mut synth_config.dislike_rate, dislike_rate);
    override_field(&mut synth_config.seed, seed);
    let corpus_out = synth::generate(&synth_config)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(crate::cli::io_ctx(format!("create {}", out_dir.display())))?;
    let items: Vec<_> = corpus_out.catalog.iter().cloned().collect();
    let expansions: Vec<_> = corpus_out.expansions.iter().cloned().collect();
    corpus::save_jsonl(&out_dir.join("dialogues.jsonl"), &corpus_out.dialogues)?;
    corpus::save_jsonl(&out_dir.join("items.jsonl"), &items)?;
    corpus::save_jsonl(&out_dir.join("expansions.jsonl"), &expansions)?;
    println!(
        "wrote {} dialogues, {} items, {} expansions to {}",
        corpus_out.dialogues.len(),
        items.len(),
        expansions.len(),
        out_dir.display()
    );
    Ok(())
}
