//! Dialogue and item catalog data model, JSONL ingestion, and corpus statistics.
//!
//! Dialogues arrive one JSON object per line with turns, ground-truth item
//! ids, and items already mentioned in the conversation. Items carry an
//! ordered metadata list plus optional review-derived fields filled in by the
//! expansion pipeline.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation error at {path}:{line}: {message}")]
    Validation {
        path: String,
        line: usize,
        message: String,
    },
    #[error("no expansion record for dialogue {dialogue_id}")]
    MissingExpansion { dialogue_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

/// One recommendation conversation. `ground_truth` lists the items the
/// dialogue should surface; `mentioned_items` lists items already named in
/// earlier turns and is subtracted before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Utterance>,
    pub ground_truth: Vec<String>,
    #[serde(default)]
    pub mentioned_items: Vec<String>,
}

/// Like/dislike phrase lists. Polarities are kept separate and are never
/// deduplicated against each other.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSet {
    pub like: Vec<String>,
    pub dislike: Vec<String>,
}

impl PreferenceSet {
    pub fn new(like: Vec<String>, dislike: Vec<String>) -> Self {
        Self { like, dislike }
    }

    pub fn is_empty(&self) -> bool {
        self.like.is_empty() && self.dislike.is_empty()
    }
}

/// Catalog item. `metadata` is an ordered key-value list with unique keys;
/// review fields are absent until the item-side expansion pipeline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub metadata: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_keyphrases: Option<PreferenceSet>,
}

impl ItemRecord {
    /// First metadata value whose key matches case-insensitively.
    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.as_str())
    }
}

/// Item catalog preserving file order, with id lookup.
#[derive(Debug, Clone, Default)]
pub struct ItemCatalog {
    items: Vec<ItemRecord>,
    by_id: HashMap<String, usize>,
}

impl ItemCatalog {
    pub fn new(items: Vec<ItemRecord>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            if by_id.insert(item.id.clone(), idx).is_some() {
                return Err(CorpusError::Validation {
                    path: "<catalog>".into(),
                    line: idx + 1,
                    message: format!("duplicate item id {:?}", item.id),
                });
            }
        }
        Ok(Self { items, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&ItemRecord> {
        self.by_id.get(id).map(|&idx| &self.items[idx])
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut ItemRecord> {
        let idx = *self.by_id.get(id)?;
        Some(&mut self.items[idx])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemRecord> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads one JSON value per line, reporting the 1-based line number on failure.
pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

/// Loads the item catalog from JSONL. Duplicate ids and duplicate metadata
/// keys within an item are rejected.
pub fn load_items(path: &Path) -> Result<ItemCatalog, CorpusError> {
    let rows: Vec<(usize, ItemRecord)> = read_jsonl(path)?;
    let mut items = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (line, item) in rows {
        if !seen.insert(item.id.clone()) {
            return Err(CorpusError::Validation {
                path: path.display().to_string(),
                line,
                message: format!("duplicate item id {:?}", item.id),
            });
        }
        let mut keys = HashSet::new();
        for (key, _) in &item.metadata {
            if !keys.insert(key.to_ascii_lowercase()) {
                return Err(CorpusError::Validation {
                    path: path.display().to_string(),
                    line,
                    message: format!("item {:?} repeats metadata key {:?}", item.id, key),
                });
            }
        }
        items.push(item);
    }
    ItemCatalog::new(items)
}

/// Loads dialogues from JSONL and validates them against the catalog:
/// turns must be non-empty, ground-truth ids unique, and every ground-truth
/// id must resolve to a catalog item.
pub fn load_dialogues(path: &Path, catalog: &ItemCatalog) -> Result<Vec<Dialogue>, CorpusError> {
    let rows: Vec<(usize, Dialogue)> = read_jsonl(path)?;
    let mut dialogues = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (line, dialogue) in rows {
        let fail = |message: String| CorpusError::Validation {
            path: path.display().to_string(),
            line,
            message,
        };
        if !seen.insert(dialogue.id.clone()) {
            return Err(fail(format!("duplicate dialogue id {:?}", dialogue.id)));
        }
        if dialogue.turns.is_empty() {
            return Err(fail(format!("dialogue {:?} has no turns", dialogue.id)));
        }
        let mut gt = HashSet::new();
        for id in &dialogue.ground_truth {
            if !gt.insert(id.clone()) {
                return Err(fail(format!(
                    "dialogue {:?} repeats ground-truth id {:?}",
                    dialogue.id, id
                )));
            }
            if !catalog.contains(id) {
                return Err(fail(format!(
                    "dialogue {:?} references unknown ground-truth id {:?}",
                    dialogue.id, id
                )));
            }
        }
        dialogues.push(dialogue);
    }
    Ok(dialogues)
}

/// Ground truth minus items already mentioned in the conversation, original
/// order preserved.
pub fn filter_ground_truth(dialogue: &Dialogue) -> Vec<String> {
    let mentioned: HashSet<&str> = dialogue.mentioned_items.iter().map(String::as_str).collect();
    dialogue
        .ground_truth
        .iter()
        .filter(|id| !mentioned.contains(id.as_str()))
        .cloned()
        .collect()
}

/// Per-dialogue preference texts produced by the expansion pipeline.
/// `augmented` is the set used downstream; `extracted` is kept for the
/// no-augmentation ablation and audits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub dialogue_id: String,
    pub extracted: PreferenceSet,
    pub augmented: PreferenceSet,
    pub provider_tag: String,
    #[serde(default)]
    pub raw_responses: Vec<String>,
}

/// Expansion records keyed by dialogue id, preserving file order.
#[derive(Debug, Clone, Default)]
pub struct ExpansionSet {
    records: Vec<ExpansionRecord>,
    by_id: HashMap<String, usize>,
}

impl ExpansionSet {
    pub fn new(records: Vec<ExpansionRecord>) -> Self {
        let by_id = records
            .iter()
            .enumerate()
            .map(|(idx, r)| (r.dialogue_id.clone(), idx))
            .collect();
        Self { records, by_id }
    }

    pub fn get(&self, dialogue_id: &str) -> Option<&ExpansionRecord> {
        self.by_id.get(dialogue_id).map(|&idx| &self.records[idx])
    }

    pub fn require(&self, dialogue_id: &str) -> Result<&ExpansionRecord, CorpusError> {
        self.get(dialogue_id).ok_or_else(|| CorpusError::MissingExpansion {
            dialogue_id: dialogue_id.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExpansionRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn load_expansions(path: &Path) -> Result<ExpansionSet, CorpusError> {
    let rows: Vec<(usize, ExpansionRecord)> = read_jsonl(path)?;
    Ok(ExpansionSet::new(rows.into_iter().map(|(_, r)| r).collect()))
}

pub fn save_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CorpusError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Corpus-level statistics. Preference averages are taken over the augmented
/// sets, one contribution per dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub n_dialogues: usize,
    pub n_items: usize,
    pub avg_likes: f64,
    pub avg_dislikes: f64,
    pub avg_turns: f64,
}

pub fn stats(
    dialogues: &[Dialogue],
    catalog: &ItemCatalog,
    expansions: &ExpansionSet,
) -> Result<DataStats, CorpusError> {
    let mut likes = 0usize;
    let mut dislikes = 0usize;
    let mut turns = 0usize;
    for dialogue in dialogues {
        let record = expansions.require(&dialogue.id)?;
        likes += record.augmented.like.len();
        dislikes += record.augmented.dislike.len();
        turns += dialogue.turns.len();
    }
    let denom = dialogues.len().max(1) as f64;
    Ok(DataStats {
        n_dialogues: dialogues.len(),
        n_items: catalog.len(),
        avg_likes: likes as f64 / denom,
        avg_dislikes: dislikes as f64 / denom,
        avg_turns: turns as f64 / denom,
    })
}
