//! Trains the hashed bag-of-tokens encoder on a synthetic corpus and prints
//! the per-epoch loss and validation metrics, the stop reason, and the
//! report's determinism hash (identical across reruns).
//!
//!     cargo run --example train_encoder

use coral::eval::synth::{generate, SynthConfig};
use coral::trainer::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig {
        n_items: 100,
        n_attributes: 40,
        attrs_per_item: 5,
        n_dialogues: 400,
        dislike_rate: 0.5,
        seed: 3,
    })?;

    let config = TrainConfig {
        dim: 32,
        buckets: 1 << 14,
        seed: 3,
        k_negatives: 8,
        batch_size: 8,
        max_epochs: 6,
        patience: 2,
        ..TrainConfig::default()
    };
    let outcome = train(&config, &corpus.dialogues, &corpus.catalog, &corpus.expansions)?;

    println!("epoch  mean_loss  val_ndcg@10  val_recall@10");
    for row in &outcome.report.epochs {
        println!(
            "{:>5}  {:>9.4}  {:>11}  {:>13}",
            row.epoch,
            row.mean_loss,
            row.val_ndcg10.map_or("-".to_string(), |v| format!("{v:.4}")),
            row.val_recall10.map_or("-".to_string(), |v| format!("{v:.4}")),
        );
    }
    println!("stop reason: {:?}", outcome.report.stop_reason);
    println!("best epoch:  {}", outcome.report.best_epoch);
    println!("report hash: {}", outcome.report.determinism_hash());
    Ok(())
}
