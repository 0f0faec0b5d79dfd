//! Preference expansion through a chat-completion provider.
//!
//! User side: a two-step pipeline per dialogue. Step one extracts the
//! like/dislike aspects stated outright; step two reasons from the
//! conversation plus the extracted set to a fuller preference profile. The
//! augmented set is what the rest of the pipeline consumes; the extracted
//! set is kept alongside for the ablation that withholds augmentation.
//!
//! Item side: the top reviews are summarized into like/dislike prose, then
//! compressed into keyphrases attached to the item record.
//!
//! Every provider response is cached content-addressed, so reruns are free
//! and offline runs replay a warm cache. Responses parse into tag form via
//! [`parse_like_dislike`]; phrases containing commas cannot survive the
//! comma-delimited wire format, a documented limitation.

mod cache;
mod parse;
pub mod prompts;
mod provider;

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Dialogue, ExpansionRecord, ItemCatalog, ItemRecord, PreferenceSet};
use crate::encoder::{truncate_to_tokens, DOC_MAX_TOKENS};
use crate::textrep::{render_dialogue, RenderError};

pub use cache::{cache_key, ExpansionCache};
pub use parse::{dedup_phrases, parse_like_dislike};
pub use prompts::{format_preferences, render_prompt, template, PromptTemplate, TemplateId};
pub use provider::{
    ChatProvider, HttpProvider, MockProvider, ProviderConfig, RetryPolicy, API_KEY_ENV,
};

/// Default number of top reviews fed to summarization.
pub const DEFAULT_TOP_REVIEWS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ExpansionError {
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },
    #[error("response parse failure: {message}")]
    Parse { message: String },
    #[error("prompt binding {name:?} is missing")]
    MissingBinding { name: String },
    #[error("item {item_id} has an empty review summary; nothing to compress")]
    EmptySummary { item_id: String },
    #[error("offline mode and no cached response for a {template} prompt (key {key})")]
    OfflineMiss { template: String, key: String },
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Review summarization output; `no_reviews` marks the degenerate case of
/// an item with nothing to summarize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewSummary {
    pub text: String,
    pub no_reviews: bool,
}

/// One line of item_prefs.jsonl: the item-side expansion products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPrefRecord {
    pub item_id: String,
    pub review_summary: Option<String>,
    pub review_keyphrases: Option<PreferenceSet>,
}

/// One line of reviews.jsonl; reviews are expected pre-sorted by
/// helpfulness, most helpful first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewsRecord {
    pub item_id: String,
    pub reviews: Vec<String>,
}

/// Loads reviews.jsonl into an id-keyed map. Duplicate ids are rejected.
pub fn load_reviews(path: &Path) -> Result<HashMap<String, Vec<String>>, ExpansionError> {
    let rows: Vec<(usize, ReviewsRecord)> = crate::corpus::read_jsonl(path)?;
    let mut map = HashMap::with_capacity(rows.len());
    for (line, record) in rows {
        if map.insert(record.item_id.clone(), record.reviews).is_some() {
            return Err(ExpansionError::Corpus(CorpusError::Validation {
                path: path.display().to_string(),
                line,
                message: format!("duplicate reviews for item {:?}", record.item_id),
            }));
        }
    }
    Ok(map)
}

/// Copies item-side expansion products onto matching catalog items.
/// Records for unknown items are an error; items without a record are left
/// untouched.
pub fn apply_item_prefs(
    catalog: &mut ItemCatalog,
    records: &[ItemPrefRecord],
) -> Result<(), ExpansionError> {
    for record in records {
        let item = catalog.get_mut(&record.item_id).ok_or_else(|| {
            ExpansionError::Corpus(CorpusError::Validation {
                path: "item_prefs".to_string(),
                line: 0,
                message: format!("unknown item id {:?}", record.item_id),
            })
        })?;
        item.review_summary = record.review_summary.clone();
        item.review_keyphrases = record.review_keyphrases.clone();
    }
    Ok(())
}

/// The expansion pipeline: one provider, optional cache, optional offline
/// enforcement. Shared immutably across worker threads.
pub struct Expander<'a> {
    pub provider: &'a dyn ChatProvider,
    pub cache: Option<&'a ExpansionCache>,
    /// Error on cache miss instead of calling the provider.
    pub offline: bool,
}

impl Expander<'_> {
    fn completed(&self, id: TemplateId, prompt: &str) -> Result<String, ExpansionError> {
        let key = cache_key(id, prompt, self.provider.tag());
        if let Some(cache) = self.cache {
            if let Some(hit) = cache.get(&key) {
                return Ok(hit);
            }
        }
        if self.offline {
            return Err(ExpansionError::OfflineMiss {
                template: id.label().to_string(),
                key,
            });
        }
        let response = self.provider.complete(prompt)?;
        if let Some(cache) = self.cache {
            cache.put(&key, id, &response)?;
        }
        Ok(response)
    }

    fn parsed(&self, id: TemplateId, prompt: &str) -> Result<(PreferenceSet, String), ExpansionError> {
        let raw = self.completed(id, prompt)?;
        let parsed = parse_like_dislike(&raw)?;
        let set = PreferenceSet::new(dedup_phrases(parsed.like), dedup_phrases(parsed.dislike));
        Ok((set, raw))
    }

    /// Step one: the preferences the user stated outright. Returns the
    /// parsed set and the raw response for audit.
    pub fn extract_superficial(
        &self,
        dialogue: &Dialogue,
    ) -> Result<(PreferenceSet, String), ExpansionError> {
        let history = render_dialogue(dialogue)?.text;
        let truncated = truncate_to_tokens(&history, DOC_MAX_TOKENS);
        let prompt = render_prompt(
            template(TemplateId::Extract),
            &[("dialogHistory", truncated)],
        )?;
        self.parsed(TemplateId::Extract, &prompt)
    }

    /// Step two: the fuller profile inferred from conversation plus the
    /// extracted set. An empty extracted set renders as "None." and the
    /// prompt instructs the model to infer from the conversation alone.
    pub fn augment_potential(
        &self,
        dialogue: &Dialogue,
        extracted: &PreferenceSet,
    ) -> Result<(PreferenceSet, String), ExpansionError> {
        let history = render_dialogue(dialogue)?.text;
        let truncated = truncate_to_tokens(&history, DOC_MAX_TOKENS);
        let prompt = render_prompt(
            template(TemplateId::Augment),
            &[
                ("extractedPreferences", format_preferences(extracted).as_str()),
                ("dialogHistory", truncated),
            ],
        )?;
        self.parsed(TemplateId::Augment, &prompt)
    }

    /// Both user-side steps for one dialogue, raw responses retained in
    /// stage order.
    pub fn expand_dialogue(&self, dialogue: &Dialogue) -> Result<ExpansionRecord, ExpansionError> {
        let (extracted, raw_extract) = self.extract_superficial(dialogue)?;
        let (augmented, raw_augment) = self.augment_potential(dialogue, &extracted)?;
        Ok(ExpansionRecord {
            dialogue_id: dialogue.id.clone(),
            extracted,
            augmented,
            provider_tag: self.provider.tag().to_string(),
            raw_responses: vec![raw_extract, raw_augment],
        })
    }

    /// Summarizes the `top_j` most helpful reviews into like/dislike prose.
    /// No reviews means an empty summary with the flag set, no provider
    /// call.
    pub fn summarize_reviews(
        &self,
        item: &ItemRecord,
        reviews: &[String],
        top_j: usize,
    ) -> Result<ReviewSummary, ExpansionError> {
        if reviews.is_empty() {
            return Ok(ReviewSummary {
                text: String::new(),
                no_reviews: true,
            });
        }
        let joined = reviews
            .iter()
            .take(top_j)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join("\n");
        let meta = |key: &str| item.metadata_value(key).unwrap_or("");
        let prompt = render_prompt(
            template(TemplateId::Summarize),
            &[
                ("title", meta("title")),
                ("genres", meta("genre")),
                ("cast", meta("cast")),
                ("director", meta("director")),
                ("reviews", &joined),
            ],
        )?;
        let text = self.completed(TemplateId::Summarize, &prompt)?;
        Ok(ReviewSummary {
            text,
            no_reviews: false,
        })
    }

    /// Compresses a review summary into like/dislike keyphrases. The
    /// prompt asks for 5 to 8; counts outside that are logged, not
    /// rejected.
    pub fn keyphrases_from_summary(
        &self,
        item: &ItemRecord,
        summary: &str,
    ) -> Result<(PreferenceSet, String), ExpansionError> {
        if summary.trim().is_empty() {
            return Err(ExpansionError::EmptySummary {
                item_id: item.id.clone(),
            });
        }
        let prompt = render_prompt(
            template(TemplateId::Keyphrase),
            &[
                ("title", item.metadata_value("title").unwrap_or("")),
                ("userInformation", summary),
            ],
        )?;
        let (set, raw) = self.parsed(TemplateId::Keyphrase, &prompt)?;
        let total = set.like.len() + set.dislike.len();
        if !(5..=8).contains(&total) {
            log::warn!(
                "item {}: {total} keyphrases, outside the prompt's 5-8 instruction",
                item.id
            );
        }
        Ok((set, raw))
    }

    /// Item-side pipeline: summarize then compress. Items without reviews
    /// produce a record with empty products.
    pub fn expand_item(
        &self,
        item: &ItemRecord,
        reviews: &[String],
        top_j: usize,
    ) -> Result<ItemPrefRecord, ExpansionError> {
        let summary = self.summarize_reviews(item, reviews, top_j)?;
        if summary.no_reviews {
            return Ok(ItemPrefRecord {
                item_id: item.id.clone(),
                review_summary: None,
                review_keyphrases: None,
            });
        }
        let (keyphrases, _) = self.keyphrases_from_summary(item, &summary.text)?;
        Ok(ItemPrefRecord {
            item_id: item.id.clone(),
            review_summary: Some(summary.text),
            review_keyphrases: Some(keyphrases),
        })
    }
}

/// Runs `work` over `inputs` on up to `jobs` threads. Results come back in
/// input order regardless of scheduling; the first failure in input order
/// wins.
pub fn run_parallel<T, R, F>(jobs: usize, inputs: &[T], work: F) -> Result<Vec<R>, ExpansionError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, ExpansionError> + Sync,
{
    let jobs = jobs.max(1).min(inputs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R, ExpansionError>>>> =
        inputs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= inputs.len() {
                    break;
                }
                let result = work(&inputs[idx]);
                *slots[idx].lock().expect("result slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot").expect("slot filled"))
        .collect()
}

/// Expands every dialogue, up to `jobs` provider calls in flight. Output
/// order matches input order.
pub fn expand_dialogues(
    expander: &Expander,
    dialogues: &[Dialogue],
    jobs: usize,
) -> Result<Vec<ExpansionRecord>, ExpansionError> {
    run_parallel(jobs, dialogues, |d| expander.expand_dialogue(d))
}

/// Expands every catalog item, catalog order preserved. Items absent from
/// the review map are treated as having no reviews.
pub fn expand_items(
    expander: &Expander,
    catalog: &ItemCatalog,
    reviews: &HashMap<String, Vec<String>>,
    top_j: usize,
    jobs: usize,
) -> Result<Vec<ItemPrefRecord>, ExpansionError> {
    let items: Vec<&ItemRecord> = catalog.iter().collect();
    run_parallel(jobs, &items, |item| {
        let item_reviews = reviews.get(&item.id).map(Vec::as_slice).unwrap_or(&[]);
        expander.expand_item(item, item_reviews, top_j)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Speaker, Utterance};

    fn dialogue(id: &str, text: &str) -> Dialogue {
        Dialogue {
            id: id.to_string(),
            turns: vec![Utterance {
                speaker: Speaker::User,
                text: text.to_string(),
            }],
            ground_truth: vec![],
            mentioned_items: vec![],
        }
    }

    fn item(id: &str, title: &str) -> ItemRecord {
        ItemRecord {
            id: id.to_string(),
            metadata: vec![
                ("Title".to_string(), title.to_string()),
                ("Genre".to_string(), "Crime".to_string()),
            ],
            review_summary: None,
            review_keyphrases: None,
        }
    }

    /// Provider scripted per prompt-prefix, with a call counter.
    struct Scripted {
        responses: Vec<(&'static str, &'static str)>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(responses: Vec<(&'static str, &'static str)>) -> Self {
            Self {
                responses,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl ChatProvider for Scripted {
        fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            for (prefix, response) in &self.responses {
                if prompt.starts_with(prefix) {
                    return Ok((*response).to_string());
                }
            }
            Err(ExpansionError::Provider {
                attempts: 1,
                message: format!("unscripted prompt: {}", &prompt[..40.min(prompt.len())]),
            })
        }

        fn tag(&self) -> &str {
            "scripted"
        }
    }

    #[test]
    fn extract_parses_and_dedups() {
        let provider = Scripted::new(vec![(
            "Given a dialogue history",
            "[Like] funny scenes, Funny Scenes, dry wit\n[Dislike] None.",
        )]);
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let (set, raw) = expander
            .extract_superficial(&dialogue("d1", "i want something funny"))
            .unwrap();
        assert_eq!(set.like, vec!["funny scenes", "dry wit"]);
        assert!(set.dislike.is_empty());
        assert!(raw.contains("Funny Scenes"));
    }

    #[test]
    fn expand_dialogue_records_both_stages_in_order() {
        let provider = Scripted::new(vec![
            ("Given a dialogue history", "[Like] heists\n[Dislike] None."),
            (
                "You are an advanced user's profile generator",
                "[Like] heists, crews, capers\n[Dislike] romance",
            ),
        ]);
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let record = expander.expand_dialogue(&dialogue("d1", "heist movies please")).unwrap();
        assert_eq!(record.extracted.like, vec!["heists"]);
        assert_eq!(record.augmented.like, vec!["heists", "crews", "capers"]);
        assert_eq!(record.augmented.dislike, vec!["romance"]);
        assert_eq!(record.provider_tag, "scripted");
        assert_eq!(record.raw_responses.len(), 2);
        assert!(record.raw_responses[0].contains("heists"));
        assert!(record.raw_responses[1].contains("capers"));
    }

    #[test]
    fn augment_prompt_carries_extracted_set_and_dialogue() {
        struct Capture(Mutex<Vec<String>>);
        impl ChatProvider for Capture {
            fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
                self.0.lock().unwrap().push(prompt.to_string());
                Ok("[Like] a\n[Dislike] None.".to_string())
            }
            fn tag(&self) -> &str {
                "capture"
            }
        }
        let provider = Capture(Mutex::new(Vec::new()));
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let extracted = PreferenceSet::new(vec!["heists".into()], vec![]);
        expander
            .augment_potential(&dialogue("d1", "heist movies please"), &extracted)
            .unwrap();
        let prompts = provider.0.lock().unwrap();
        assert!(prompts[0].contains("User's preferences:\n[Like] heists\n[Dislike] None."));
        assert!(prompts[0].contains("Conversation:\n[User] heist movies please"));
    }

    #[test]
    fn dialogue_text_is_truncated_to_the_document_budget() {
        struct Capture(Mutex<Vec<String>>);
        impl ChatProvider for Capture {
            fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
                self.0.lock().unwrap().push(prompt.to_string());
                Ok("[Like] a\n[Dislike] None.".to_string())
            }
            fn tag(&self) -> &str {
                "capture"
            }
        }
        let provider = Capture(Mutex::new(Vec::new()));
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let long_text = (0..700).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        expander.extract_superficial(&dialogue("d1", &long_text)).unwrap();
        let prompt = provider.0.lock().unwrap()[0].clone();
        // "[User]" contributes one token ("user"), so 511 words remain.
        assert!(prompt.contains("w510"));
        assert!(!prompt.contains("w511 "));
    }

    #[test]
    fn cache_hit_bypasses_the_provider() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ExpansionCache::open(&dir.path().join("cache.jsonl")).unwrap();
        let provider = Scripted::new(vec![
            ("Given a dialogue history", "[Like] heists\n[Dislike] None."),
            (
                "You are an advanced user's profile generator",
                "[Like] heists, crews\n[Dislike] None.",
            ),
        ]);
        let expander = Expander {
            provider: &provider,
            cache: Some(&cache),
            offline: false,
        };
        let d = dialogue("d1", "heist movies please");
        let first = expander.expand_dialogue(&d).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 2);
        let second = expander.expand_dialogue(&d).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 2, "served from cache");
        assert_eq!(first, second);
    }

    #[test]
    fn offline_mode_errors_on_cache_miss_and_replays_hits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ExpansionCache::open(&dir.path().join("cache.jsonl")).unwrap();
        let provider = Scripted::new(vec![
            ("Given a dialogue history", "[Like] heists\n[Dislike] None."),
            (
                "You are an advanced user's profile generator",
                "[Like] heists, crews\n[Dislike] None.",
            ),
        ]);
        let d = dialogue("d1", "heist movies please");
        let offline = Expander {
            provider: &provider,
            cache: Some(&cache),
            offline: true,
        };
        let err = offline.expand_dialogue(&d).unwrap_err();
        assert!(matches!(err, ExpansionError::OfflineMiss { .. }));

        let online = Expander {
            provider: &provider,
            cache: Some(&cache),
            offline: false,
        };
        let record = online.expand_dialogue(&d).unwrap();
        let calls_after_warm = provider.calls.load(Ordering::SeqCst);
        let replayed = offline.expand_dialogue(&d).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), calls_after_warm);
        assert_eq!(record, replayed);
    }

    #[test]
    fn summarize_uses_only_top_three_reviews() {
        struct Capture(Mutex<Vec<String>>);
        impl ChatProvider for Capture {
            fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
                self.0.lock().unwrap().push(prompt.to_string());
                Ok("[Like] pacing\n[Dislike] None.".to_string())
            }
            fn tag(&self) -> &str {
                "capture"
            }
        }
        let provider = Capture(Mutex::new(Vec::new()));
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let reviews: Vec<String> = (1..=5).map(|i| format!("review number {i}")).collect();
        let summary = expander
            .summarize_reviews(&item("m1", "Heat"), &reviews, DEFAULT_TOP_REVIEWS)
            .unwrap();
        assert!(!summary.no_reviews);
        let prompt = provider.0.lock().unwrap()[0].clone();
        assert!(prompt.contains("review number 3"));
        assert!(!prompt.contains("review number 4"));
        assert!(prompt.contains("Title: Heat"));
    }

    #[test]
    fn no_reviews_short_circuits_without_provider_calls() {
        let provider = Scripted::new(vec![]);
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let summary = expander.summarize_reviews(&item("m1", "Heat"), &[], 3).unwrap();
        assert!(summary.no_reviews);
        assert!(summary.text.is_empty());
        assert_eq!(provider.calls.load(Ordering::SeqCst), 0);
        let record = expander.expand_item(&item("m1", "Heat"), &[], 3).unwrap();
        assert_eq!(record.review_summary, None);
        assert_eq!(record.review_keyphrases, None);
    }

    #[test]
    fn empty_summary_is_rejected_by_keyphrase_step() {
        let provider = Scripted::new(vec![]);
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let err = expander
            .keyphrases_from_summary(&item("m1", "Heat"), "  \n")
            .unwrap_err();
        assert!(matches!(err, ExpansionError::EmptySummary { item_id } if item_id == "m1"));
    }

    #[test]
    fn expand_item_attaches_summary_and_keyphrases() {
        let provider = Scripted::new(vec![
            (
                "Given some popular reviews",
                "[Like] tense heists, craft\n[Dislike] long runtime",
            ),
            (
                "Below are the common [Like] and [Dislike]",
                "[Like] tense heists, craftsmanship, ensemble cast\n[Dislike] long runtime, cold tone",
            ),
        ]);
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let reviews = vec!["great heist scenes".to_string()];
        let record = expander.expand_item(&item("m1", "Heat"), &reviews, 3).unwrap();
        assert_eq!(
            record.review_summary.as_deref(),
            Some("[Like] tense heists, craft\n[Dislike] long runtime")
        );
        let phrases = record.review_keyphrases.unwrap();
        assert_eq!(phrases.like.len(), 3);
        assert_eq!(phrases.dislike.len(), 2);
    }

    #[test]
    fn parallel_expansion_preserves_input_order_and_determinism() {
        let provider = MockProvider;
        let dialogues: Vec<Dialogue> = (0..30)
            .map(|i| dialogue(&format!("d{i}"), &format!("movies about topic {i}")))
            .collect();
        let expander = Expander {
            provider: &provider,
            cache: None,
            offline: false,
        };
        let serial = expand_dialogues(&expander, &dialogues, 1).unwrap();
        let parallel = expand_dialogues(&expander, &dialogues, 8).unwrap();
        assert_eq!(serial, parallel);
        for (d, r) in dialogues.iter().zip(&serial) {
            assert_eq!(d.id, r.dialogue_id);
        }
    }

    #[test]
    fn parallel_failure_reports_the_first_bad_input() {
        struct FailOn7;
        impl ChatProvider for FailOn7 {
            fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
                if prompt.contains("topic 7") {
                    Err(ExpansionError::Provider {
                        attempts: 3,
                        message: "scripted outage".to_string(),
                    })
                } else {
                    Ok("[Like] a\n[Dislike] None.".to_string())
                }
            }
            fn tag(&self) -> &str {
                "fail7"
            }
        }
        let dialogues: Vec<Dialogue> = (0..20)
            .map(|i| dialogue(&format!("d{i}"), &format!("movies about topic {i}")))
            .collect();
        let expander = Expander {
            provider: &FailOn7,
            cache: None,
            offline: false,
        };
        let err = expand_dialogues(&expander, &dialogues, 4).unwrap_err();
        assert!(err.to_string().contains("scripted outage"));
    }

    #[test]
    fn reviews_file_round_trips_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        let rows = vec![
            ReviewsRecord {
                item_id: "m1".to_string(),
                reviews: vec!["r1".to_string(), "r2".to_string()],
            },
            ReviewsRecord {
                item_id: "m2".to_string(),
                reviews: vec![],
            },
        ];
        crate::corpus::save_jsonl(&path, &rows).unwrap();
        let map = load_reviews(&path).unwrap();
        assert_eq!(map["m1"], vec!["r1", "r2"]);
        assert!(map["m2"].is_empty());

        let dup = vec![
            ReviewsRecord {
                item_id: "m1".to_string(),
                reviews: vec![],
            },
            ReviewsRecord {
                item_id: "m1".to_string(),
                reviews: vec![],
            },
        ];
        crate::corpus::save_jsonl(&path, &dup).unwrap();
        assert!(load_reviews(&path).is_err());
    }

    #[test]
    fn apply_item_prefs_updates_matching_items() {
        let mut catalog = ItemCatalog::new(vec![item("m1", "Heat"), item("m2", "Ronin")]).unwrap();
        let records = vec![ItemPrefRecord {
            item_id: "m1".to_string(),
            review_summary: Some("summary".to_string()),
            review_keyphrases: Some(PreferenceSet::new(vec!["heists".into()], vec![])),
        }];
        apply_item_prefs(&mut catalog, &records).unwrap();
        assert_eq!(catalog.get("m1").unwrap().review_summary.as_deref(), Some("summary"));
        assert!(catalog.get("m2").unwrap().review_summary.is_none());

        let unknown = vec![ItemPrefRecord {
            item_id: "zz".to_string(),
            review_summary: None,
            review_keyphrases: None,
        }];
        assert!(apply_item_prefs(&mut catalog, &unknown).is_err());
    }
}
