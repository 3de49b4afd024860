//! Command-line tools and the HTTP query service for a term base.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod render;
pub mod server;
pub mod service;

pub use cli::{run, Cli};
pub use config::ServiceConfig;
pub use error::AppError;
pub use service::QueryService;
