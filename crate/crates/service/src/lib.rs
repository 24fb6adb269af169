//! HTTP/JSON suggestion service.
//!
//! Suggest calls read an immutable model snapshot. Confirmations are appended
//! to a newline-delimited JSON log and only reach the model through an
//! explicit rebuild, which retrains from the base data plus the log and swaps
//! the snapshot atomically.
//!
//! | route                    | purpose                                   |
//! |--------------------------|-------------------------------------------|
//! | `POST /api/suggest`      | top-k suggestions for one customer name   |
//! | `POST /api/confirm`      | record an engineer's choice (201)         |
//! | `POST /api/rebuild`      | retrain and swap the served model         |
//! | `GET /api/model`         | method, version and training counts       |
//! | `GET /api/confirmations` | the confirmation log as a JSON array      |
//! | `GET /health`            | liveness                                  |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use signalmatch::classifiers::Prediction;

pub mod confirmations;
mod state;

pub use confirmations::{Confirmation, ConfirmationLog, CONFIRMATION_PROJECT};
pub use state::{model_version, ModelInfo, Service, ServiceConfig, Snapshot, MAX_K};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("no model is loaded")]
    NoModel,
    #[error(transparent)]
    Core(#[from] signalmatch::Error),
    #[error("confirmation log {}: {source}", path.display())]
    Log {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("confirmation log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("background task failed: {0}")]
    Task(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NoModel => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(rejection: JsonRejection) -> Self {
        ServiceError::BadRequest(rejection.body_text())
    }
}

type AppState = Arc<Service>;

#[derive(Debug, Deserialize)]
pub struct SuggestRequest {
    pub signal: String,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub entries: Vec<Prediction>,
    pub fallback: bool,
    pub model_version: String,
}

#[derive(Debug, Deserialize)]
pub struct ConfirmRequest {
    pub signal: String,
    pub chosen: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RebuildResponse {
    pub model_version: String,
}

/// All routes over a shared service.
pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/suggest", post(suggest))
        .route("/api/confirm", post(confirm))
        .route("/api/rebuild", post(rebuild))
        .route("/api/model", get(model_info))
        .route("/api/confirmations", get(export_confirmations))
        .with_state(service)
}

async fn health(State(svc): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_loaded": svc.snapshot().is_some() }))
}

async fn suggest(
    State(svc): State<AppState>,
    body: Result<Json<SuggestRequest>, JsonRejection>,
) -> Result<Json<SuggestResponse>, ServiceError> {
    let Json(req) = body?;
    let (preds, model_version) = svc.suggest(&req.signal, req.k)?;
    Ok(Json(SuggestResponse {
        entries: preds.entries,
        fallback: preds.fallback,
        model_version,
    }))
}

async fn confirm(
    State(svc): State<AppState>,
    body: Result<Json<ConfirmRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Confirmation>), ServiceError> {
    let Json(req) = body?;
    let record = blocking(move || svc.confirm(&req.signal, &req.chosen, &req.source)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn rebuild(State(svc): State<AppState>) -> Result<Json<RebuildResponse>, ServiceError> {
    let snapshot = blocking(move || svc.rebuild()).await?;
    Ok(Json(RebuildResponse {
        model_version: snapshot.version().to_owned(),
    }))
}

async fn model_info(State(svc): State<AppState>) -> Result<Json<ModelInfo>, ServiceError> {
    let snapshot = svc.snapshot().ok_or(ServiceError::NoModel)?;
    Ok(Json(snapshot.info.clone()))
}

async fn export_confirmations(
    State(svc): State<AppState>,
) -> Result<Json<Vec<Confirmation>>, ServiceError> {
    Ok(Json(blocking(move || svc.log().read_all()).await?))
}

// file I/O and training stay off the async workers
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))?
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Trains the first model, then serves on a fresh multi-threaded runtime.
/// `on_ready` runs once the model is loaded, before binding.
pub fn run(
    config: ServiceConfig,
    addr: SocketAddr,
    on_ready: impl FnOnce(&Service),
) -> Result<(), ServiceError> {
    let service = Arc::new(Service::start(config)?);
    on_ready(&service);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Task(e.to_string()))?;
    runtime
        .block_on(serve(service, addr))
        .map_err(|e| ServiceError::Task(e.to_string()))
}
