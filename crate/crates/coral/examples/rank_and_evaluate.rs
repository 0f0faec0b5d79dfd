//! Trains a small model, saves and reloads its checkpoint, ranks one
//! dialogue, and reports Recall@k / NDCG@k on the held-out split.
//!
//!     cargo run --example rank_and_evaluate

use coral::encoder::{build_item_table, load_checkpoint, save_checkpoint};
use coral::eval::synth::{generate, SynthConfig};
use coral::eval::{evaluate, DenseRanker, Ranker};
use coral::trainer::{train, validation_split, TrainConfig, UserMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig {
        n_items: 100,
        n_attributes: 40,
        attrs_per_item: 5,
        n_dialogues: 400,
        dislike_rate: 0.5,
        seed: 11,
    })?;

    let config = TrainConfig {
        dim: 32,
        buckets: 1 << 14,
        seed: 11,
        k_negatives: 8,
        max_epochs: 5,
        patience: 2,
        ..TrainConfig::default()
    };
    let outcome = train(&config, &corpus.dialogues, &corpus.catalog, &corpus.expansions)?;

    // Round trip the checkpoint; ranking below uses the reloaded weights.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.bin");
    let table = build_item_table(&outcome.encoder, &corpus.catalog)?;
    save_checkpoint(&path, &table, &outcome.encoder)?;
    let (table, encoder) = load_checkpoint(&path)?;

    let ranker = DenseRanker {
        encoder: &encoder,
        table: &table,
        expansions: &corpus.expansions,
        params: config.scoring,
        user_mode: UserMode::Separate,
        use_extracted: false,
    };

    let dialogue = &corpus.dialogues[0];
    let ranked = ranker.rank_dialogue(dialogue, 5)?;
    println!("top 5 for {} (target {:?}):", dialogue.id, dialogue.ground_truth);
    for entry in &ranked.entries {
        println!("  {}  {:.4}", entry.item_id, entry.score);
    }

    let (_, val) = validation_split(&corpus.dialogues, config.seed);
    let report = evaluate(&ranker, &val, &[10, 50], "trained")?;
    print!("{}", report.to_csv());
    Ok(())
}
