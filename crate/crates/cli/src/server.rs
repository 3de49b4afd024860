use std::collections::HashMap;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde_json::json;
use termbase::lexicon::WriterLock;
use tower_http::cors::CorsLayer;

use crate::config::ServiceConfig;
use crate::error::{code, AppError};
use crate::service::QueryService;

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json; charset=utf-8")], body).into_response()
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, self.to_json())
    }
}

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, AppError> + Send + 'static,
) -> Result<T, AppError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::new(code::INTERNAL, e.to_string()))?
}

async fn search(State(service): State<QueryService>, Query(params): Query<HashMap<String, String>>) -> Response {
    let result = blocking(move || {
        service.search(
            params.get("q").map(String::as_str),
            params.get("lang").map(String::as_str),
            params.get("limit").map(String::as_str),
        )
    })
    .await;
    match result {
        Ok(result) => json_response(StatusCode::OK, result.to_json()),
        Err(e) => e.into_response(),
    }
}

async fn term(State(service): State<QueryService>, Path(id): Path<String>) -> Response {
    match blocking(move || service.term(&id)).await {
        Ok(detail) => json_response(StatusCode::OK, detail.to_json()),
        Err(e) => e.into_response(),
    }
}

async fn stats(State(service): State<QueryService>) -> Response {
    match blocking(move || service.stats()).await {
        Ok(stats) => json_response(StatusCode::OK, json!(stats).to_string()),
        Err(e) => e.into_response(),
    }
}

async fn healthz(State(service): State<QueryService>) -> Response {
    match blocking(move || service.stats()).await {
        Ok(stats) => json_response(StatusCode::OK, json!({"status": "ok", "entries": stats.entry_count}).to_string()),
        Err(e) => e.into_response(),
    }
}

async fn fallback() -> Response {
    AppError::new(code::NOT_FOUND, "no such endpoint").into_response()
}

pub fn router(service: QueryService) -> Router {
    Router::new()
        .route("/api/v1/search", get(search))
        .route("/api/v1/terms/:id", get(term))
        .route("/api/v1/stats", get(stats))
        .route("/healthz", get(healthz))
        .fallback(fallback)
        .layer(CorsLayer::permissive())
        .with_state(service)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut signal) => {
                signal.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
    tracing::info!("shutting down after in-flight requests");
}

/// Serves until SIGINT or SIGTERM. Holds the store's writer lock the whole
/// time so ingestion and mapping cannot change data under the index.
pub fn serve(config: &ServiceConfig) -> Result<(), AppError> {
    let addr = config.socket_addr()?;
    if !config.store_path.exists() {
        return Err(AppError::new(
            code::STORE,
            format!("store {} does not exist", config.store_path.display()),
        ));
    }
    let _lock = WriterLock::acquire(&config.store_path)?;
    let service = QueryService::open(config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| AppError::new(code::INTERNAL, format!("cannot bind {addr}: {e}")))?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, router(service))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(AppError::from)
    })
}
