//! Stateless HTTP scoring service.
//!
//! Exposes the scoring engine over HTTP/1.1 with JSON bodies:
//!
//! * `POST /v1/score` — a `ScoreRequest` body returns a `ScoreResponse`.
//! * `GET /v1/health` — `{"status":"ok","version":...}`.
//!
//! Handlers share one immutable engine, so identical request bodies produce
//! byte-identical response payloads and concurrent requests cannot observe
//! each other. Errors come back as `{"error":{"code","message"}}` with the
//! code one of `INVALID_REQUEST`, `TASK_MISMATCH`, or `INTERNAL`; request
//! latency is logged, never embedded in the response body.

use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

use rsreward::config::{AppConfig, ServiceConfig};
use rsreward::scoring::{ScoreError, ScoreRequest, ScoringEngine};

/// Service startup failure.
#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Shared immutable state behind the handlers.
pub struct ServiceState {
    engine: ScoringEngine,
}

impl ServiceState {
    pub fn from_config(cfg: &AppConfig) -> Self {
        Self {
            engine: ScoringEngine::new(cfg.weights, cfg.grpo, cfg.rewards, cfg.embedder),
        }
    }
}

/// Build the router over a shared engine.
pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/health", get(health))
        .with_state(state)
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        body,
    )
        .into_response()
}

fn error_response(err: &ScoreError) -> Response {
    let status = match err {
        ScoreError::InvalidRequest(_) | ScoreError::TaskMismatch(_) => StatusCode::BAD_REQUEST,
        ScoreError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    let body = serde_json::json!({
        "error": { "code": err.code(), "message": err.to_string() }
    });
    json_response(status, serde_json::to_vec(&body).expect("error body serializes"))
}

async fn score(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let started = Instant::now();
    let text = match std::str::from_utf8(&body) {
        Ok(text) => text,
        Err(_) => {
            return error_response(&ScoreError::InvalidRequest(
                "request body is not valid UTF-8".into(),
            ))
        }
    };
    let request = match ScoreRequest::from_json(text) {
        Ok(request) => request,
        Err(err) => return error_response(&err),
    };
    match state.engine.handle_score(&request) {
        Ok(response) => {
            let body = match serde_json::to_vec(&response) {
                Ok(body) => body,
                Err(e) => return error_response(&ScoreError::Internal(e.to_string())),
            };
            tracing::info!(
                request_id = %response.request_id,
                task = %request.task,
                query = request.query.as_deref().unwrap_or(""),
                group_size = request.rollouts.len(),
                eligible_count = response.group.eligible_count,
                mean_reward = response.group.mean,
                latency_ms = started.elapsed().as_secs_f64() * 1e3,
                "scored group"
            );
            json_response(StatusCode::OK, body)
        }
        Err(err) => {
            tracing::warn!(
                request_id = %request.request_id,
                code = err.code(),
                latency_ms = started.elapsed().as_secs_f64() * 1e3,
                "rejected request"
            );
            error_response(&err)
        }
    }
}

async fn health() -> Response {
    let body = serde_json::json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
    });
    json_response(StatusCode::OK, serde_json::to_vec(&body).expect("health body"))
}

/// Bind the configured address (after environment overrides) and serve until
/// shutdown. Returns only on bind failure or server error.
pub async fn serve(cfg: &AppConfig) -> Result<(), ServeError> {
    let service_cfg: ServiceConfig = cfg
        .service
        .clone()
        .with_env_overrides()
        .map_err(|e| ServeError::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, e)))?;
    let addr = service_cfg.bind_address();
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.clone(),
            source,
        })?;
    tracing::info!(%addr, "scoring service listening");
    serve_on(listener, cfg).await
}

/// Serve on an already-bound listener (used by tests with ephemeral ports).
pub async fn serve_on(listener: TcpListener, cfg: &AppConfig) -> Result<(), ServeError> {
    let state = Arc::new(ServiceState::from_config(cfg));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    Ok(())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

/// Blocking entry point for the CLI: builds a runtime, installs a default
/// log subscriber, and serves until shutdown.
pub fn run_blocking(cfg: &AppConfig) -> Result<(), ServeError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(cfg))
}
