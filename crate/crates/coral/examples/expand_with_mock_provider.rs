//! Runs the two-step preference expansion (extract, then augment) with the
//! deterministic mock provider, backed by an append-only response cache.
//! The second pass is served entirely from the cache.
//!
//!     cargo run --example expand_with_mock_provider

use coral::corpus::{Dialogue, Utterance};
use coral::expansion::{ChatProvider, Expander, ExpansionCache, MockProvider};

struct Counting<'a> {
    inner: &'a MockProvider,
    calls: std::sync::atomic::AtomicUsize,
}

impl ChatProvider for Counting<'_> {
    fn complete(&self, prompt: &str) -> Result<String, coral::expansion::ExpansionError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.complete(prompt)
    }

    fn tag(&self) -> &str {
        self.inner.tag()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dialogue = Dialogue {
        id: "demo".to_string(),
        turns: vec![
            Utterance {
                speaker: coral::corpus::Speaker::User,
                text: "looking for a tense thriller, nothing supernatural".to_string(),
            },
            Utterance {
                speaker: coral::corpus::Speaker::System,
                text: "any favourite directors?".to_string(),
            },
            Utterance {
                speaker: coral::corpus::Speaker::User,
                text: "fincher, and i liked Memento (2000)".to_string(),
            },
        ],
        ground_truth: vec![],
        mentioned_items: vec![],
    };

    let dir = tempfile::tempdir()?;
    let cache = ExpansionCache::open(&dir.path().join("cache.jsonl"))?;
    let mock = MockProvider;
    let provider = Counting {
        inner: &mock,
        calls: std::sync::atomic::AtomicUsize::new(0),
    };

    let expander = Expander {
        provider: &provider,
        cache: Some(&cache),
        offline: false,
    };
    let record = expander.expand_dialogue(&dialogue)?;
    println!("extracted: {:?}", record.extracted);
    println!("augmented: {:?}", record.augmented);
    let first_pass = provider.calls.load(std::sync::atomic::Ordering::SeqCst);
    println!("provider calls, cold cache: {first_pass}");

    // Same inputs, warm cache: zero provider calls, identical record.
    let replay = expander.expand_dialogue(&dialogue)?;
    let second_pass = provider.calls.load(std::sync::atomic::Ordering::SeqCst) - first_pass;
    println!("provider calls, warm cache: {second_pass}");
    assert_eq!(record, replay);

    // Offline mode serves the warm cache too; a cold prompt would error
    // instead of silently calling out.
    let offline = Expander {
        provider: &provider,
        cache: Some(&cache),
        offline: true,
    };
    let offline_record = offline.expand_dialogue(&dialogue)?;
    assert_eq!(record, offline_record);
    println!("offline replay matches");
    Ok(())
}
