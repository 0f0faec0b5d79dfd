//! Builds the similarity-softmax negative distribution for one
//! conversation and draws hard negatives from it: deterministic per seed,
//! never containing the positive, and biased toward confusable items.
//!
//!     cargo run --example hard_negative_sampling

use coral::encoder::build_item_table;
use coral::eval::synth::{generate, SynthConfig};
use coral::sampler::{neg_distribution, sample_negatives};
use coral::trainer::{build_user_representation, TrainConfig, UserMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig {
        n_items: 60,
        n_attributes: 30,
        attrs_per_item: 4,
        n_dialogues: 50,
        dislike_rate: 0.5,
        seed: 21,
    })?;

    let config = TrainConfig {
        dim: 32,
        buckets: 1 << 14,
        ..TrainConfig::default()
    };
    let encoder = coral::encoder::HashedEncoder::new(config.dim, config.buckets, config.seed);
    let table = build_item_table(&encoder, &corpus.catalog)?;

    let dialogue = &corpus.dialogues[0];
    let record = corpus.expansions.get(&dialogue.id).expect("record per dialogue");
    let user = build_user_representation(&encoder, dialogue, &record.augmented, UserMode::Separate)?;
    let positive = dialogue.ground_truth[0].as_str();

    let dist = neg_distribution(&user.context, &table)?;
    let mut by_prob: Vec<(&str, f64)> = dist
        .ids()
        .iter()
        .map(String::as_str)
        .zip(dist.probs().iter().copied())
        .collect();
    by_prob.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("most confusable items for {} (positive {positive}):", dialogue.id);
    for (id, p) in by_prob.iter().take(5) {
        println!("  {id}  p = {p:.4}");
    }

    let draw = sample_negatives(&dist, 8, positive, 7)?;
    println!("drawn negatives (seed 7): {:?}", draw.ids);
    assert!(!draw.ids.contains(&positive.to_string()), "positive never drawn");

    let replay = sample_negatives(&dist, 8, positive, 7)?;
    assert_eq!(draw, replay, "same seed, same draw");
    let other = sample_negatives(&dist, 8, positive, 8)?;
    println!("drawn negatives (seed 8): {:?}", other.ids);
    Ok(())
}
