//! Shows the three-term score S = sim(context, item) + alpha * sim(like,
//! item) - beta * sim(dislike, item) moving an item up and down, first on
//! hand-built vectors, then as Recall@50 with exact attribute embeddings.
//!
//!     cargo run --example preference_aware_scoring

use coral::encoder::{Embedding, EmbeddingTable, UserRepresentation};
use coral::eval::synth::{self, SynthConfig};
use coral::eval::{evaluate, ExternalRanker};
use coral::scoring::{rank, score, ScoringParams};

fn unit(values: &[f64]) -> Embedding {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Embedding::from_values(values.iter().map(|v| v / norm).collect())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two candidate items equally close to the conversation; one matches
    // the stated like, the other the stated dislike.
    let user = UserRepresentation {
        dialogue_id: "demo".to_string(),
        context: unit(&[1.0, 1.0, 0.0, 0.0]),
        like: unit(&[0.0, 0.0, 1.0, 0.0]),
        dislike: unit(&[0.0, 0.0, 0.0, 1.0]),
    };
    let liked_item = unit(&[1.0, 1.0, 0.8, 0.0]);
    let disliked_item = unit(&[1.0, 1.0, 0.0, 0.8]);
    let params = ScoringParams::default();

    for (label, item) in [("matches like", &liked_item), ("matches dislike", &disliked_item)] {
        let with = score(&user, item, &params)?;
        let without = score(&user, item, &ScoringParams::context_only())?;
        println!("{label:>15}: context-only {without:.4}  full {with:.4}");
    }

    let mut table = EmbeddingTable::new(4);
    table.insert("liked".to_string(), liked_item.values().iter().map(|v| *v as f32).collect())?;
    table.insert(
        "disliked".to_string(),
        disliked_item.values().iter().map(|v| *v as f32).collect(),
    )?;
    let ranked = rank(&user, &table, &params, 2)?;
    println!(
        "full-score order: {:?}",
        ranked.entries.iter().map(|e| e.item_id.as_str()).collect::<Vec<_>>()
    );

    // Same effect at corpus scale: exact attribute embeddings, so the only
    // difference between the two reports is the preference terms.
    let config = SynthConfig {
        n_dialogues: 600,
        ..SynthConfig::default()
    };
    let corpus = synth::generate(&config)?;
    let table = synth::oracle_item_table(&corpus.catalog, config.n_attributes)?;
    let users: Vec<UserRepresentation> = corpus
        .dialogues
        .iter()
        .map(|d| {
            let record = corpus.expansions.get(&d.id).expect("record per dialogue");
            synth::oracle_user(d, &record.augmented, config.n_attributes)
        })
        .collect::<Result<_, _>>()?;

    for (label, params) in [
        ("with like/dislike", ScoringParams::default()),
        ("context only", ScoringParams::context_only()),
    ] {
        let ranker = ExternalRanker::new(&users, &table, params);
        let report = evaluate(&ranker, &corpus.dialogues, &[50], label)?;
        println!(
            "{label:>17}: recall@50 = {:.4}",
            report.recall_at(50).expect("dialogues evaluated")
        );
    }
    Ok(())
}
