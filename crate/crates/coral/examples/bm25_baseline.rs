//! Scores the BM25 lexical baseline against the trained dense retriever on
//! the same synthetic corpus. BM25 sees exactly the words the user spoke;
//! the trained model also exploits the expanded preferences.
//!
//!     cargo run --example bm25_baseline

use coral::encoder::build_item_table;
use coral::eval::synth::{generate, SynthConfig};
use coral::eval::{evaluate, Bm25Ranker, DenseRanker};
use coral::trainer::{train, validation_split, TrainConfig, UserMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig {
        n_items: 100,
        n_attributes: 40,
        attrs_per_item: 5,
        n_dialogues: 400,
        dislike_rate: 0.5,
        seed: 2,
    })?;

    let config = TrainConfig {
        dim: 32,
        buckets: 1 << 14,
        seed: 2,
        k_negatives: 8,
        max_epochs: 5,
        patience: 2,
        ..TrainConfig::default()
    };
    let (_, val) = validation_split(&corpus.dialogues, config.seed);

    let bm25 = Bm25Ranker::build(&corpus.catalog)?;
    let lexical = evaluate(&bm25, &val, &[10, 50], "bm25")?;

    let outcome = train(&config, &corpus.dialogues, &corpus.catalog, &corpus.expansions)?;
    let table = build_item_table(&outcome.encoder, &corpus.catalog)?;
    let ranker = DenseRanker {
        encoder: &outcome.encoder,
        table: &table,
        expansions: &corpus.expansions,
        params: config.scoring,
        user_mode: UserMode::Separate,
        use_extracted: false,
    };
    let dense = evaluate(&ranker, &val, &[10, 50], "trained")?;

    println!("variant,k,recall,ndcg,n_evaluated");
    for report in [&lexical, &dense] {
        for line in report.to_csv().lines().skip(1) {
            println!("{line}");
        }
    }
    Ok(())
}
