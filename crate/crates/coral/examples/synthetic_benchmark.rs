//! Generates the synthetic attribute-overlap corpus and prints what one
//! dialogue, its expansion record, and the target item look like.
//!
//!     cargo run --example synthetic_benchmark

use coral::corpus;
use coral::eval::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        n_items: 80,
        n_attributes: 40,
        attrs_per_item: 5,
        n_dialogues: 300,
        dislike_rate: 0.5,
        seed: 7,
    };
    let corpus_out = generate(&config)?;

    let stats = corpus::stats(
        &corpus_out.dialogues,
        &corpus_out.catalog,
        &corpus_out.expansions,
    )?;
    println!("{}", serde_json::to_string_pretty(&stats)?);

    let dialogue = &corpus_out.dialogues[0];
    println!("\n--- {} ---", dialogue.id);
    for turn in &dialogue.turns {
        println!("{:?}: {}", turn.speaker, turn.text);
    }
    println!("ground truth: {:?}", dialogue.ground_truth);

    let record = corpus_out
        .expansions
        .get(&dialogue.id)
        .expect("generator writes one record per dialogue");
    println!("extracted likes:  {:?}", record.extracted.like);
    println!("augmented likes:  {:?}", record.augmented.like);
    println!("dislikes:         {:?}", record.augmented.dislike);

    let target = corpus_out
        .catalog
        .get(&dialogue.ground_truth[0])
        .expect("ground truth resolves");
    println!("target metadata:  {:?}", target.metadata);
    println!(
        "target keyphrases: {:?}",
        target.review_keyphrases.as_ref().map(|p| &p.like)
    );

    // The conversation only reveals a subset of attributes; the augmented
    // record holds the full target set. That gap is what training and the
    // like term recover.
    Ok(())
}
