//! Content-addressed response cache.
//!
//! Keys hash the template, the fully rendered prompt, and the provider tag,
//! so a cached response is reused only when the exact same request would be
//! made again. Storage is an append-only JSONL sidecar; writes go through a
//! single mutex-guarded handle, so concurrent workers never interleave
//! partial lines.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompts::TemplateId;
use super::ExpansionError;

/// Cache key: SHA-256 over the NUL-framed (template label, provider tag,
/// prompt) triple, hex-encoded.
pub fn cache_key(template: TemplateId, prompt: &str, provider_tag: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template.label().as_bytes());
    hasher.update([0]);
    hasher.update(provider_tag.as_bytes());
    hasher.update([0]);
    hasher.update(prompt.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    template: String,
    response: String,
}

#[derive(Debug)]
struct CacheState {
    entries: HashMap<String, String>,
    file: File,
}

#[derive(Debug)]
pub struct ExpansionCache {
    path: PathBuf,
    state: Mutex<CacheState>,
}

impl ExpansionCache {
    /// Opens or creates the cache file and loads every existing entry.
    /// Later lines win when a key repeats.
    pub fn open(path: &Path) -> Result<Self, ExpansionError> {
        let cache_err = |message: String| ExpansionError::Cache {
            path: path.display().to_string(),
            message,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| cache_err(e.to_string()))?;
            }
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| cache_err(e.to_string()))?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| cache_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine = serde_json::from_str(&line)
                    .map_err(|e| cache_err(format!("line {}: {e}", idx + 1)))?;
                entries.insert(parsed.key, parsed.response);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| cache_err(e.to_string()))?;
        Ok(Self {
            path: path.to_path_buf(),
            state: Mutex::new(CacheState { entries, file }),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.state.lock().expect("cache lock").entries.get(key).cloned()
    }

    /// Records a response, appending one line to the sidecar. A key already
    /// present is left untouched.
    pub fn put(
        &self,
        key: &str,
        template: TemplateId,
        response: &str,
    ) -> Result<(), ExpansionError> {
        let mut state = self.state.lock().expect("cache lock");
        if state.entries.contains_key(key) {
            return Ok(());
        }
        let line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            template: template.label().to_string(),
            response: response.to_string(),
        })
        .expect("cache line serializes");
        writeln!(state.file, "{line}").map_err(|e| ExpansionError::Cache {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })?;
        state.entries.insert(key.to_string(), response.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_all_three_parts() {
        let base = cache_key(TemplateId::Extract, "prompt", "mock");
        assert_eq!(base, cache_key(TemplateId::Extract, "prompt", "mock"));
        assert_ne!(base, cache_key(TemplateId::Augment, "prompt", "mock"));
        assert_ne!(base, cache_key(TemplateId::Extract, "prompt2", "mock"));
        assert_ne!(base, cache_key(TemplateId::Extract, "prompt", "gpt-4o-mini"));
        assert_eq!(base.len(), 64);
    }

    #[test]
    fn entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let key = cache_key(TemplateId::Extract, "p", "mock");
        {
            let cache = ExpansionCache::open(&path).unwrap();
            assert!(cache.get(&key).is_none());
            cache.put(&key, TemplateId::Extract, "[Like] a\n[Dislike] None.").unwrap();
            assert_eq!(cache.get(&key).unwrap(), "[Like] a\n[Dislike] None.");
        }
        let cache = ExpansionCache::open(&path).unwrap();
        assert_eq!(cache.get(&key).unwrap(), "[Like] a\n[Dislike] None.");
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn duplicate_put_appends_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = ExpansionCache::open(&path).unwrap();
        let key = cache_key(TemplateId::Extract, "p", "mock");
        cache.put(&key, TemplateId::Extract, "r1").unwrap();
        let size_once = std::fs::metadata(&path).unwrap().len();
        cache.put(&key, TemplateId::Extract, "r2").unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), size_once);
        // First write wins.
        assert_eq!(cache.get(&key).unwrap(), "r1");
    }

    #[test]
    fn multiline_responses_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = ExpansionCache::open(&path).unwrap();
        let response = "[Like] a, b\n[Dislike] c\nextra trailing prose";
        let key = cache_key(TemplateId::Keyphrase, "p", "mock");
        cache.put(&key, TemplateId::Keyphrase, response).unwrap();
        drop(cache);
        let cache = ExpansionCache::open(&path).unwrap();
        assert_eq!(cache.get(&key).unwrap(), response);
    }

    #[test]
    fn corrupt_lines_are_reported_with_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        let err = ExpansionCache::open(&path).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn concurrent_writers_never_corrupt_the_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = ExpansionCache::open(&path).unwrap();
        std::thread::scope(|scope| {
            for t in 0..8 {
                let cache = &cache;
                scope.spawn(move || {
                    for i in 0..50 {
                        let key = cache_key(TemplateId::Extract, &format!("p{t}:{i}"), "mock");
                        cache.put(&key, TemplateId::Extract, &format!("r{t}:{i}")).unwrap();
                    }
                });
            }
        });
        assert_eq!(cache.len(), 400);
        drop(cache);
        let reopened = ExpansionCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 400);
    }
}
