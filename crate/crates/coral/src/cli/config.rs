//! Pipeline configuration: a TOML document supplying defaults that
//! command-line flags override field by field.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::expansion::{ProviderConfig, RetryPolicy};
use crate::scoring::ScoringParams;
use crate::trainer::{NegativeMode, TrainConfig, UserMode};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    Read { path: String, message: String },
    #[error("config file {path}: {message}")]
    Toml { path: String, message: String },
    #[error("required input {path} does not exist ({role})")]
    MissingInput { path: String, role: &'static str },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dialogues: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub expansions: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub item_prefs: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    /// "mock" or "http".
    pub kind: String,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    /// Maximum in-flight provider calls.
    pub concurrency: usize,
    pub top_reviews: usize,
}

impl Default for ProviderSection {
    fn default() -> Self {
        let p = ProviderConfig::default();
        Self {
            kind: "mock".to_string(),
            endpoint: p.endpoint,
            model: p.model_name,
            temperature: p.temperature,
            timeout_secs: p.timeout.as_secs(),
            retry_attempts: p.retry.attempts,
            retry_base_ms: p.retry.base_delay.as_millis() as u64,
            concurrency: 4,
            top_reviews: crate::expansion::DEFAULT_TOP_REVIEWS,
        }
    }
}

impl ProviderSection {
    pub fn provider_config(&self) -> ProviderConfig {
        ProviderConfig {
            endpoint: self.endpoint.clone(),
            model_name: self.model.clone(),
            temperature: self.temperature,
            timeout: Duration::from_secs(self.timeout_secs),
            retry: RetryPolicy {
                attempts: self.retry_attempts,
                base_delay: Duration::from_millis(self.retry_base_ms),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub alpha: f64,
    pub beta: f64,
    pub use_like: bool,
    pub use_dislike: bool,
}

impl Default for ScoringSection {
    fn default() -> Self {
        let p = ScoringParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            use_like: p.use_like,
            use_dislike: p.use_dislike,
        }
    }
}

impl ScoringSection {
    pub fn params(&self) -> ScoringParams {
        ScoringParams {
            alpha: self.alpha,
            beta: self.beta,
            use_like: self.use_like,
            use_dislike: self.use_dislike,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: usize,
    pub buckets: usize,
    pub seed: u64,
    pub tau: f64,
    pub k_negatives: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// "hard" or "in_batch".
    pub negative_mode: String,
    /// "separate" or "concatenated".
    pub user_mode: String,
    pub table_dir: Option<PathBuf>,
    pub negatives_dump: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dim: t.dim,
            buckets: t.buckets,
            seed: t.seed,
            tau: t.tau,
            k_negatives: t.k_negatives,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            negative_mode: "hard".to_string(),
            user_mode: "separate".to_string(),
            table_dir: None,
            negatives_dump: None,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, scoring: ScoringParams) -> Result<TrainConfig, ConfigError> {
        let negative_mode = match self.negative_mode.as_str() {
            "hard" => NegativeMode::Hard,
            "in_batch" => NegativeMode::InBatch,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "negative_mode must be \"hard\" or \"in_batch\", got {other:?}"
                )))
            }
        };
        let user_mode = match self.user_mode.as_str() {
            "separate" => UserMode::Separate,
            "concatenated" => UserMode::Concatenated,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "user_mode must be \"separate\" or \"concatenated\", got {other:?}"
                )))
            }
        };
        Ok(TrainConfig {
            dim: self.dim,
            buckets: self.buckets,
            seed: self.seed,
            tau: self.tau,
            k_negatives: self.k_negatives,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            scoring,
            negative_mode,
            user_mode,
            table_dir: self.table_dir.clone(),
            negatives_dump: self.negatives_dump.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { ks: vec![10, 50] }
    }
}

/// The full pipeline configuration; every section has working defaults, so
/// an empty document is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub provider: ProviderSection,
    pub scoring: ScoringSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Toml {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Applies `Some` overrides over current values; the merge direction every
/// flag follows.
pub fn override_field<T>(current: &mut T, flag: Option<T>) {
    if let Some(value) = flag {
        *current = value;
    }
}

/// Fails with the role of the missing file, mapped to the config exit code.
pub fn require_input(path: &Path, role: &'static str) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::MissingInput {
            path: path.display().to_string(),
            role,
        })
    }
}

/// A path flag falling back to the config file, then failing with the role
/// name when neither is set.
pub fn resolve_path(
    flag: Option<PathBuf>,
    config_value: &Option<PathBuf>,
    role: &'static str,
) -> Result<PathBuf, ConfigError> {
    flag.or_else(|| config_value.clone())
        .ok_or_else(|| ConfigError::Invalid(format!("no {role} path given (flag or config file)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_defaults() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.scoring.alpha, 0.5);
        assert_eq!(cfg.scoring.beta, 0.3);
        assert_eq!(cfg.train.tau, 0.05);
        assert_eq!(cfg.train.k_negatives, 16);
        assert_eq!(cfg.eval.ks, vec![10, 50]);
    }

    #[test]
    fn partial_sections_fill_in() {
        let cfg: PipelineConfig = toml::from_str(
            "[scoring]\nbeta = 0.7\n\n[train]\nseed = 9\n\n[paths]\ndialogues = \"d.jsonl\"\n",
        )
        .unwrap();
        assert_eq!(cfg.scoring.beta, 0.7);
        assert_eq!(cfg.scoring.alpha, 0.5, "untouched default");
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.paths.dialogues.as_deref(), Some(Path::new("d.jsonl")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<PipelineConfig>("[train]\nlr = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("lr"));
    }

    #[test]
    fn flags_override_config_values() {
        let cfg: PipelineConfig = toml::from_str("[train]\nseed = 9\ntau = 0.2\n").unwrap();
        let mut section = cfg.train.clone();
        override_field(&mut section.seed, Some(11));
        override_field(&mut section.tau, None);
        assert_eq!(section.seed, 11, "flag wins");
        assert_eq!(section.tau, 0.2, "config survives absent flag");
    }

    #[test]
    fn mode_strings_are_validated() {
        let section = TrainSection {
            negative_mode: "soft".to_string(),
            ..TrainSection::default()
        };
        assert!(section.train_config(ScoringParams::default()).is_err());
        let section = TrainSection {
            user_mode: "joint".to_string(),
            ..TrainSection::default()
        };
        assert!(section.train_config(ScoringParams::default()).is_err());
        let section = TrainSection::default();
        let tc = section.train_config(ScoringParams::default()).unwrap();
        assert_eq!(tc.negative_mode, NegativeMode::Hard);
        assert_eq!(tc.user_mode, UserMode::Separate);
    }

    #[test]
    fn missing_input_names_path_and_role() {
        let err = require_input(Path::new("/definitely/not/here.jsonl"), "dialogues").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("/definitely/not/here.jsonl"));
        assert!(text.contains("dialogues"));
    }

    #[test]
    fn config_document_round_trips() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
