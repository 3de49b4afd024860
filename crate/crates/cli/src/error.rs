use serde::Serialize;
use termbase::ingest::IngestError;
use termbase::lang::UnsupportedLanguage;
use termbase::query::QueryError;
use termbase::senses::{BackendError, EvalError, InventoryError, MapAllError};
use termbase::StoreError;

use crate::config::ConfigError;

/// Error codes shared by the HTTP API and the command line. Stable.
pub mod code {
    pub const INVALID_QUERY: &str = "invalid-query";
    pub const UNSUPPORTED_LANG: &str = "unsupported-lang";
    pub const INVALID_LIMIT: &str = "invalid-limit";
    pub const NOT_FOUND: &str = "not-found";
    pub const INTERNAL: &str = "internal";
    pub const CONFIG: &str = "config";
    pub const STORE_LOCKED: &str = "store-locked";
    pub const STORE: &str = "store";
    pub const INPUT: &str = "invalid-input";
    pub const BACKEND: &str = "backend";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppError {
    #[serde(rename = "error")]
    pub code: &'static str,
    pub message: String,
}

impl AppError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("errors always serialize")
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code {
            code::INVALID_QUERY | code::UNSUPPORTED_LANG | code::INVALID_LIMIT | code::INPUT => 400,
            code::NOT_FOUND => 404,
            _ => 500,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for AppError {}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::Locked(_) => code::STORE_LOCKED,
            StoreError::NotFound { .. } => code::NOT_FOUND,
            StoreError::Validation { .. } | StoreError::Conflict(_) | StoreError::DanglingSource { .. } => {
                code::INPUT
            }
            _ => code::STORE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<QueryError> for AppError {
    fn from(e: QueryError) -> Self {
        let code = match &e {
            QueryError::InvalidQuery(_) => code::INVALID_QUERY,
            QueryError::InvalidLimit => code::INVALID_LIMIT,
            QueryError::NotFound(_) => code::NOT_FOUND,
            QueryError::StaleIndex(_) | QueryError::Store(_) => code::INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

impl From<UnsupportedLanguage> for AppError {
    fn from(e: UnsupportedLanguage) -> Self {
        Self::new(code::UNSUPPORTED_LANG, e.to_string())
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        Self::new(code::CONFIG, e.to_string())
    }
}

impl From<IngestError> for AppError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Store(e) => e.into(),
            other => Self::new(code::INPUT, other.to_string()),
        }
    }
}

impl From<InventoryError> for AppError {
    fn from(e: InventoryError) -> Self {
        Self::new(code::INPUT, e.to_string())
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Store(e) => e.into(),
            other => Self::new(code::INPUT, other.to_string()),
        }
    }
}

impl From<MapAllError> for AppError {
    fn from(e: MapAllError) -> Self {
        match e {
            MapAllError::Store(e) => e.into(),
            other => Self::new(code::INPUT, other.to_string()),
        }
    }
}

impl From<BackendError> for AppError {
    fn from(e: BackendError) -> Self {
        Self::new(code::BACKEND, e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        Self::new(code::INTERNAL, e.to_string())
    }
}
