//! The encoding path on its own: tokenization, hashing into buckets, mean
//! pooling, and L2 normalization, plus the token budgets applied to each
//! text source.
//!
//!     cargo run --example hashed_encoder_basics

use coral::encoder::{token_budget, tokenize, truncate_to_tokens, HashedEncoder, SourceKind};

fn main() {
    let text = "Sleepless in Seattle (1993), a Rom-Com classic!";
    println!("tokens: {:?}", tokenize(text, usize::MAX));

    let encoder = HashedEncoder::with_defaults(42);
    println!(
        "budgets: item/dialogue {}, preference {}",
        token_budget(SourceKind::ItemFull),
        token_budget(SourceKind::LikePrefs)
    );

    for token in ["sleepless", "seattle", "1993"] {
        println!("bucket({token:?}) = {}", encoder.bucket_of(token));
    }

    let embedding = encoder.encode(text, SourceKind::ItemFull);
    println!("dim = {}, norm = {:.6}", embedding.dim(), embedding.norm());

    // Same multiset of tokens, same vector: casing and punctuation are
    // normalized away before hashing.
    let shuffled = encoder.encode("a rom com CLASSIC, Seattle 1993 sleepless in!", SourceKind::ItemFull);
    let drift: f64 = embedding
        .values()
        .iter()
        .zip(shuffled.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("order/case drift: {drift:.1e}");

    // Prompts truncate raw text by token count while keeping the original
    // bytes of what survives.
    let long = (0..600).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    let cut = truncate_to_tokens(&long, 512);
    println!(
        "truncated {} -> {} tokens",
        tokenize(&long, usize::MAX).len(),
        tokenize(cut, usize::MAX).len()
    );

    let empty = encoder.encode("!!! ???", SourceKind::LikePrefs);
    println!("no tokens -> zero vector, norm {}", empty.norm());
}
