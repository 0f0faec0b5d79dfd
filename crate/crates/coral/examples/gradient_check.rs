//! Verifies the analytic loss gradient against central finite differences
//! on random samples, printing the worst relative error seen.
//!
//!     cargo run --example gradient_check

use coral::encoder::HashedEncoder;
use coral::scoring::ScoringParams;
use coral::trainer::{finite_difference_check, loss_gradient, TrainSample};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| format!("w{}", rng.random_range(0..50u32)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = ScoringParams::default();
    let tau = 0.05;
    let mut worst = 0.0f64;

    for trial in 0..10 {
        let encoder = HashedEncoder::new(16, 1 << 12, 1000 + trial);
        let sample = TrainSample {
            dialogue_id: format!("d{trial}"),
            context_text: random_text(&mut rng, 12),
            like_text: random_text(&mut rng, 6),
            dislike_text: random_text(&mut rng, 4),
            positive_id: "pos".to_string(),
            positive_text: random_text(&mut rng, 10),
            negatives: (0..4)
                .map(|n| (format!("neg{n}"), random_text(&mut rng, 10)))
                .collect(),
        };

        let (loss, grad) = loss_gradient(&encoder, &sample, &params, tau);
        let check = finite_difference_check(&encoder, &sample, &params, tau, 1e-5);
        worst = worst.max(check.max_rel_err);
        println!(
            "trial {trial}: loss {loss:.4}, touched rows {}, checked {} entries, max rel err {:.2e}",
            grad.rows().len(),
            check.checked_entries,
            check.max_rel_err
        );
    }
    println!("worst over all trials: {worst:.2e}");
    assert!(worst <= 1e-4, "analytic gradient disagrees with finite differences");
}
