//! Trains and evaluates every ablation variant of the full system on one
//! synthetic corpus and prints the comparison table.
//!
//! Variants: full, no_ld (no like/dislike terms), no_r (no review
//! keyphrases), no_ldr (both), no_aug (extracted instead of augmented
//! preferences), no_neg (in-batch instead of hard negatives), no_pl
//! (single concatenated user text).
//!
//!     cargo run --example ablation_suite

use coral::eval::synth::{generate, SynthConfig};
use coral::eval::{run_ablation, Variant};
use coral::trainer::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig {
        n_items: 80,
        n_attributes: 40,
        attrs_per_item: 5,
        n_dialogues: 400,
        dislike_rate: 0.5,
        seed: 4,
    })?;

    let config = TrainConfig {
        dim: 32,
        buckets: 1 << 14,
        seed: 4,
        k_negatives: 8,
        max_epochs: 4,
        patience: 2,
        ..TrainConfig::default()
    };

    println!("variant,k,recall,ndcg,n_evaluated");
    for variant in Variant::ALL {
        let outcome = run_ablation(
            variant,
            &config,
            &corpus.dialogues,
            &corpus.catalog,
            &corpus.expansions,
            &[10],
        )?;
        for line in outcome.report.to_csv().lines().skip(1) {
            println!("{line}");
        }
    }
    Ok(())
}
