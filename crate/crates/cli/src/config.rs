use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use termbase::search::SearchConfig;
use termbase::senses::LlmConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Settings shared by every subcommand and the HTTP service.
///
/// ```toml
/// store_path = "terms.db"
/// listen_address = "127.0.0.1:8080"
/// max_results = 50
/// fuzzy_threshold_ratio = 0.25
/// log_level = "info"
///
/// [llm]
/// endpoint_url = "https://api.openai.com/v1/chat/completions"
/// model = "gpt-4o-mini"
/// key_env_var = "TERMBASE_LLM_KEY"
/// ```
///
/// The LLM key itself is only ever read from the named environment variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub store_path: PathBuf,
    pub listen_address: String,
    pub max_results: usize,
    pub fuzzy_threshold_ratio: f64,
    pub llm: LlmConfig,
    pub log_level: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            store_path: PathBuf::from("termbase.db"),
            listen_address: "127.0.0.1:8080".into(),
            max_results: 50,
            fuzzy_threshold_ratio: 0.25,
            llm: LlmConfig::default(),
            log_level: "info".into(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.into(), message },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string().trim_end().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_results < 1 {
            return Err(ConfigError::Invalid("max_results must be at least 1".into()));
        }
        if !(self.fuzzy_threshold_ratio > 0.0 && self.fuzzy_threshold_ratio <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "fuzzy_threshold_ratio must be in (0, 1], got {}",
                self.fuzzy_threshold_ratio
            )));
        }
        self.socket_addr()?;
        if self.store_path.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("store_path is empty".into()));
        }
        Ok(())
    }

    pub fn socket_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen_address
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("listen_address '{}': {e}", self.listen_address)))
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig { fuzzy_threshold_ratio: self.fuzzy_threshold_ratio }
    }

    /// Candidate limit used when a query does not give one.
    pub fn default_limit(&self) -> usize {
        self.max_results.min(10)
    }
}
