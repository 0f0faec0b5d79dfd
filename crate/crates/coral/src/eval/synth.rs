//! Synthetic attribute-based corpus for controlled experiments.
//!
//! Items are distinct fixed-size attribute sets. Each dialogue targets one
//! item, reveals only a few of its attributes in conversation, and supplies
//! the rest through the augmented like list; an optional disliked distractor
//! attribute is mentioned in the conversation text, where it misleads
//! context-only scoring. By construction, every target attribute appears in
//! the conversation or the like list, so preference-aware scoring has
//! everything it needs while context-only scoring does not.
//!
//! The module also ships an attribute-basis oracle embedder: each attribute
//! token maps to one coordinate, everything else is ignored. It makes
//! similarity equal to set overlap, which turns ranking claims into
//! counting arguments.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Dialogue, ExpansionRecord, ExpansionSet, ItemCatalog, ItemRecord, PreferenceSet, Speaker,
    Utterance,
};
use crate::encoder::{tokenize, Embedding, EmbeddingTable, UserRepresentation};
use crate::eval::EvalError;
use crate::textrep::{render_dialogue, render_item, render_preferences};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_items: usize,
    pub n_attributes: usize,
    pub attrs_per_item: usize,
    pub n_dialogues: usize,
    /// Probability that a dialogue mentions a disliked distractor attribute.
    pub dislike_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_items: 500,
            n_attributes: 100,
            attrs_per_item: 8,
            n_dialogues: 2000,
            dislike_rate: 0.5,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_items == 0 || self.n_dialogues == 0 {
            return Err(SynthError::Config(
                "n_items and n_dialogues must be positive".into(),
            ));
        }
        if self.attrs_per_item < 2 {
            return Err(SynthError::Config(
                "attrs_per_item must be at least 2 so an attribute can stay hidden".into(),
            ));
        }
        if self.attrs_per_item > self.n_attributes {
            return Err(SynthError::Config(format!(
                "attrs_per_item = {} exceeds n_attributes = {}",
                self.attrs_per_item, self.n_attributes
            )));
        }
        if !(0.0..=1.0).contains(&self.dislike_rate) {
            return Err(SynthError::Config(format!(
                "dislike_rate must be in [0, 1], got {}",
                self.dislike_rate
            )));
        }
        if self.dislike_rate > 0.0 && self.n_attributes == self.attrs_per_item {
            return Err(SynthError::Config(
                "dislike_rate > 0 needs at least one attribute outside every item".into(),
            ));
        }
        if !distinct_sets_available(self.n_attributes, self.attrs_per_item, self.n_items) {
            return Err(SynthError::Config(format!(
                "cannot build {} distinct {}-attribute sets from {} attributes",
                self.n_items, self.attrs_per_item, self.n_attributes
            )));
        }
        Ok(())
    }
}

/// True when C(n, k) >= wanted, computed incrementally to dodge overflow.
fn distinct_sets_available(n: usize, k: usize, wanted: usize) -> bool {
    let mut combos: u128 = 1;
    for i in 0..k {
        combos = combos.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if combos >= wanted as u128 {
            return true;
        }
    }
    combos >= wanted as u128
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dialogues: Vec<Dialogue>,
    pub catalog: ItemCatalog,
    pub expansions: ExpansionSet,
}

pub fn attr_word(index: usize) -> String {
    format!("attr{index:03}")
}

/// Parses an attribute token back to its index; None for anything else.
pub fn attr_index(token: &str) -> Option<usize> {
    let digits = token.strip_prefix("attr")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Generates the corpus. Fully determined by the config.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Distinct attribute sets, one per item, stored sorted.
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(config.n_items);
    let mut item_attrs: Vec<Vec<usize>> = Vec::with_capacity(config.n_items);
    let mut attempts = 0usize;
    while item_attrs.len() < config.n_items {
        attempts += 1;
        if attempts > 200 * config.n_items + 1000 {
            return Err(SynthError::Config(
                "attribute set sampling failed to find enough distinct sets".into(),
            ));
        }
        let mut attrs: Vec<usize> =
            rand::seq::index::sample(&mut rng, config.n_attributes, config.attrs_per_item)
                .into_vec();
        attrs.sort_unstable();
        if seen.insert(attrs.clone()) {
            item_attrs.push(attrs);
        }
    }

    let items: Vec<ItemRecord> = item_attrs
        .iter()
        .enumerate()
        .map(|(i, attrs)| {
            let words: Vec<String> = attrs.iter().map(|&a| attr_word(a)).collect();
            ItemRecord {
                id: format!("item{i:04}"),
                metadata: vec![("Attributes".to_string(), words.join(" "))],
                review_summary: None,
                // The first two attributes double as reviewer keyphrases.
                review_keyphrases: Some(PreferenceSet::new(
                    words.iter().take(2).cloned().collect(),
                    Vec::new(),
                )),
            }
        })
        .collect();
    let catalog = ItemCatalog::new(items).expect("generated ids are unique");

    let max_reveal = 3.min(config.attrs_per_item - 1);
    let mut dialogues = Vec::with_capacity(config.n_dialogues);
    let mut records = Vec::with_capacity(config.n_dialogues);
    for d in 0..config.n_dialogues {
        let target = rng.random_range(0..config.n_items);
        let attrs = &item_attrs[target];
        let n_reveal = rng.random_range(1..=max_reveal);
        let revealed_pos =
            rand::seq::index::sample(&mut rng, config.attrs_per_item, n_reveal).into_vec();
        let revealed: HashSet<usize> = revealed_pos.iter().map(|&p| attrs[p]).collect();
        let revealed_words: Vec<String> = attrs
            .iter()
            .filter(|a| revealed.contains(a))
            .map(|&a| attr_word(a))
            .collect();
        let all_words: Vec<String> = attrs.iter().map(|&a| attr_word(a)).collect();

        let distractor = if rng.random_bool(config.dislike_rate) {
            let target_set: HashSet<usize> = attrs.iter().copied().collect();
            loop {
                let cand = rng.random_range(0..config.n_attributes);
                if !target_set.contains(&cand) {
                    break Some(cand);
                }
            }
        } else {
            None
        };

        let mut user_text = format!("i am looking for something with {}", revealed_words.join(" "));
        if let Some(bad) = distractor {
            user_text.push_str(&format!(" but not {}", attr_word(bad)));
        }
        let dialogue_id = format!("dlg{d:05}");
        dialogues.push(Dialogue {
            id: dialogue_id.clone(),
            turns: vec![
                Utterance {
                    speaker: Speaker::User,
                    text: user_text,
                },
                Utterance {
                    speaker: Speaker::System,
                    text: "noted i will keep that in mind".to_string(),
                },
            ],
            ground_truth: vec![format!("item{target:04}")],
            mentioned_items: Vec::new(),
        });

        let dislike_words: Vec<String> = distractor.map(attr_word).into_iter().collect();
        records.push(ExpansionRecord {
            dialogue_id,
            extracted: PreferenceSet::new(revealed_words, dislike_words.clone()),
            // The augmented list carries the full target attribute set, so
            // hidden attributes are recoverable only through it.
            augmented: PreferenceSet::new(all_words, dislike_words),
            provider_tag: "synthetic".to_string(),
            raw_responses: Vec::new(),
        });
    }

    Ok(SynthCorpus {
        dialogues,
        catalog,
        expansions: ExpansionSet::new(records),
    })
}

/// Embeds text on the attribute basis: coordinate `a` is set when
/// `attr{a}` occurs, duplicates ignored, then L2-normalized. Non-attribute
/// tokens contribute nothing; no attributes at all gives the zero vector.
pub fn oracle_embed(text: &str, n_attributes: usize) -> Embedding {
    let mut values = vec![0.0f64; n_attributes];
    let mut any = false;
    for token in tokenize(text, usize::MAX) {
        if let Some(a) = attr_index(&token) {
            if a < n_attributes && values[a] == 0.0 {
                values[a] = 1.0;
                any = true;
            }
        }
    }
    if !any {
        return Embedding::zeros(n_attributes);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Embedding::from_values(values.into_iter().map(|v| v / norm).collect())
}

/// Attribute-basis embeddings of every rendered item text.
pub fn oracle_item_table(
    catalog: &ItemCatalog,
    n_attributes: usize,
) -> Result<EmbeddingTable, EvalError> {
    let mut table = EmbeddingTable::new(n_attributes);
    for item in catalog.iter() {
        let text = render_item(item)?.text;
        let emb = oracle_embed(&text, n_attributes);
        let row: Vec<f32> = emb.values().iter().map(|&v| v as f32).collect();
        table.insert(item.id.clone(), row)?;
    }
    Ok(table)
}

/// Attribute-basis user views from the rendered dialogue and preferences.
pub fn oracle_user(
    dialogue: &Dialogue,
    prefs: &PreferenceSet,
    n_attributes: usize,
) -> Result<UserRepresentation, EvalError> {
    let context = render_dialogue(dialogue)?.text;
    let (like, dislike) = render_preferences(prefs);
    Ok(UserRepresentation {
        dialogue_id: dialogue.id.clone(),
        context: oracle_embed(&context, n_attributes),
        like: oracle_embed(&like.text, n_attributes),
        dislike: oracle_embed(&dislike.text, n_attributes),
    })
}
