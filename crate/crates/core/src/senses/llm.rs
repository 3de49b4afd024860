//! Chat-completion backed sense mapper.
//!
//! Sends one request per entry to an OpenAI-style `/chat/completions`
//! endpoint and expects the reply content to be exactly
//! `{"sense_ordinal": n, "confidence": x}`. The chosen sense scores
//! `confidence`, every other sense 0.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, MapperBackend, ScoreRequest};
use crate::lexicon::MappingMethod;

const PROMPT_TEMPLATE: &str = include_str!("../../data/sense_prompt.txt");
const SYSTEM_PROMPT: &str = "You are a careful bilingual lexicographer. Answer with JSON only.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub key_env_var: String,
    pub max_retries: u32,
    pub timeout_ms: u64,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            key_env_var: "TERMBASE_LLM_KEY".into(),
            max_retries: 3,
            timeout_ms: 30_000,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl LlmConfig {
    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Verdict {
    sense_ordinal: u32,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    total_tokens: u64,
}

pub struct LlmBackend {
    config: LlmConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    name: String,
}

impl std::fmt::Debug for LlmBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl LlmBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: LlmConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.key_env_var).map_err(|_| {
            BackendError::Config(format!("environment variable {} is not set", config.key_env_var))
        })?;
        Self::with_key(config, key)
    }

    pub fn with_key(config: LlmConfig, api_key: String) -> Result<Self, BackendError> {
        if config.endpoint_url.trim().is_empty() || config.model.trim().is_empty() {
            return Err(BackendError::Config("endpoint_url and model are required".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let name = format!("llm:{}", config.model);
        Ok(Self { config, api_key, client, name })
    }

    pub fn render_prompt(request: &ScoreRequest<'_>) -> String {
        let senses = request
            .senses
            .iter()
            .map(|s| match &s.domain_tag {
                Some(domain) => format!("{}. ({domain}) {}", s.ordinal, s.gloss),
                None => format!("{}. {}", s.ordinal, s.gloss),
            })
            .collect::<Vec<_>>()
            .join("\n");
        PROMPT_TEMPLATE
            .replace("{{term}}", request.source_term)
            .replace("{{equivalent}}", request.target_term)
            .replace("{{definition}}", request.definition.unwrap_or("(none)"))
            .replace("{{senses}}", &senses)
    }

    fn attempt(&self, body: &serde_json::Value, request: &ScoreRequest<'_>) -> Result<Vec<f64>, BackendError> {
        let response = self
            .client
            .post(&self.config.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(BackendError::Rejected(format!("HTTP {status}: {detail}")));
        }
        let completion: Completion = response
            .json()
            .map_err(|e| BackendError::Transport(format!("unreadable completion: {e}")))?;
        let usage = completion.usage.unwrap_or_default();
        tracing::info!(
            model = %self.config.model,
            prompt_tokens = usage.prompt_tokens,
            completion_tokens = usage.completion_tokens,
            total_tokens = usage.total_tokens,
            "sense mapping completion"
        );
        let content = completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("completion has no content".into()))?;
        let verdict: Verdict = serde_json::from_str(content.trim())
            .map_err(|e| BackendError::Transport(format!("non-conforming reply {content:?}: {e}")))?;
        if !(0.0..=1.0).contains(&verdict.confidence) {
            return Err(BackendError::Transport(format!(
                "confidence {} outside [0, 1]",
                verdict.confidence
            )));
        }
        if !request.senses.iter().any(|s| s.ordinal == verdict.sense_ordinal) {
            return Err(BackendError::Transport(format!(
                "sense_ordinal {} is not one of the offered senses",
                verdict.sense_ordinal
            )));
        }
        Ok(request
            .senses
            .iter()
            .map(|s| if s.ordinal == verdict.sense_ordinal { verdict.confidence } else { 0.0 })
            .collect())
    }
}

impl MapperBackend for LlmBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn method(&self) -> MappingMethod {
        MappingMethod::Llm
    }

    fn requires_definition(&self) -> bool {
        false
    }

    fn score_batch(&self, request: &ScoreRequest<'_>) -> Result<Vec<f64>, BackendError> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": Self::render_prompt(request)},
            ],
        });
        let mut attempt = 0;
        loop {
            match self.attempt(&body, request) {
                Ok(scores) => return Ok(scores),
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff(attempt);
                    tracing::warn!(error = %e, attempt, ?delay, "retrying sense mapping request");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
