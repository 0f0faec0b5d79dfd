//! Chat-completion providers: a deterministic mock and an HTTP client
//! speaking the OpenAI-compatible chat-completions protocol.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::ExpansionError;
use crate::encoder::fnv1a64;

/// Environment variable holding the bearer token for HTTP providers.
pub const API_KEY_ENV: &str = "CORAL_API_KEY";

pub trait ChatProvider: Send + Sync {
    /// Completes one prompt. Implementations retry transient failures
    /// themselves and return an error only once retries are exhausted.
    fn complete(&self, prompt: &str) -> Result<String, ExpansionError>;

    /// Short identifier recorded on expansion records and mixed into cache
    /// keys, e.g. the model name.
    fn tag(&self) -> &str;
}

/// Deterministic offline provider: the response is a pure function of the
/// prompt. It recognizes each prompt template by its fixed opening words and
/// answers in the matching format, deriving phrase content from a hash of
/// the prompt so distinct inputs stay distinguishable.
#[derive(Debug, Default, Clone)]
pub struct MockProvider;

impl MockProvider {
    fn token(prompt: &str, salt: u64) -> String {
        format!("{:04x}", fnv1a64(prompt).wrapping_add(salt) & 0xffff)
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
        let t = |salt| Self::token(prompt, salt);
        let response = if prompt.starts_with("Given a dialogue history") {
            format!("[Like] mock aspect {}, mock aspect {}\n[Dislike] None.", t(1), t(2))
        } else if prompt.starts_with("You are an advanced user's profile generator") {
            format!(
                "[Like] mock theme {}, mock theme {}, mock theme {}\n[Dislike] mock flaw {}",
                t(1),
                t(2),
                t(3),
                t(4)
            )
        } else if prompt.starts_with("Given some popular reviews") {
            format!(
                "[Like] viewers praised mock quality {}\n[Dislike] some disliked mock issue {}",
                t(1),
                t(2)
            )
        } else if prompt.starts_with("Below are the common [Like] and [Dislike]") {
            format!(
                "[Like] mock key {}, mock key {}, mock key {}, mock key {}, mock key {}\n[Dislike] mock flaw {}",
                t(1),
                t(2),
                t(3),
                t(4),
                t(5),
                t(6)
            )
        } else {
            format!("[Like] mock generic {}\n[Dislike] None.", t(1))
        };
        Ok(response)
    }

    fn tag(&self) -> &str {
        "mock"
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff before retry number `retry` (1-based).
    fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry - 1)
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    /// Base URL; "/chat/completions" is appended unless already present.
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".to_string(),
            model_name: "gpt-4o-mini".to_string(),
            // Deterministic decoding by default.
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    content: String,
}

/// Blocking OpenAI-compatible chat-completions client with bounded retries.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    url: String,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // The bearer token must never reach logs.
        f.debug_struct("HttpProvider")
            .field("url", &self.url)
            .field("model", &self.config.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpProvider {
    /// Reads the bearer token from `CORAL_API_KEY` if set.
    pub fn new(config: ProviderConfig) -> Result<Self, ExpansionError> {
        if config.temperature < 0.0 {
            return Err(ExpansionError::Provider {
                attempts: 0,
                message: format!("temperature must be >= 0, got {}", config.temperature),
            });
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ExpansionError::Provider {
                attempts: 0,
                message: format!("client construction failed: {e}"),
            })?;
        let url = if config.endpoint.ends_with("/chat/completions") {
            config.endpoint.clone()
        } else {
            format!("{}/chat/completions", config.endpoint.trim_end_matches('/'))
        };
        Ok(Self {
            config,
            api_key: std::env::var(API_KEY_ENV).ok(),
            client,
            url,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| format!("transport: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(format!("http {status}: {}", text.chars().take(200).collect::<String>()));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| format!("malformed response body: {e}"))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| "response has no choices".to_string())
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, prompt: &str) -> Result<String, ExpansionError> {
        let attempts = self.config.retry.attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.config.retry.delay(attempt - 1));
            }
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(message) => last_error = message,
            }
        }
        Err(ExpansionError::Provider {
            attempts,
            message: last_error,
        })
    }

    fn tag(&self) -> &str {
        &self.config.model_name
    }
}
