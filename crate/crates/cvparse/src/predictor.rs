//! A section prediction service: fetches its pattern artifact from the model
//! store at startup (checksum-verified), then answers predict requests for
//! its section's fields. Health reports ready only once the artifact is
//! loaded; simulated inference latency makes timing experiments
//! reproducible without real models.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cvparse_core::ner::{NerResult, PatternRules, SectionKind};
use serde::{Deserialize, Serialize};

use crate::latency::LatencyModel;
use crate::modelstore::{ModelStore, StoreError};
use crate::svc::{serve_app, RunningService};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMode {
    /// Apply the pattern rules loaded from the model artifact.
    Stub,
    /// Respond with empty fields; latency simulation only.
    None,
}

impl ExtractionMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "stub" => Some(ExtractionMode::Stub),
            "none" => Some(ExtractionMode::None),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub struct PredictorConfig {
    pub listen: SocketAddr,
    pub kind: SectionKind,
    pub store_root: Option<PathBuf>,
    pub model_id: Option<String>,
    pub latency: LatencyModel,
    pub latency_seed: u64,
    pub extraction: ExtractionMode,
    /// Artificial model-load time; keeps the not-ready window observable.
    pub load_delay: Duration,
}

impl PredictorConfig {
    pub fn new(listen: SocketAddr, kind: SectionKind) -> Self {
        Self {
            listen,
            kind,
            store_root: None,
            model_id: None,
            latency: LatencyModel::None,
            latency_seed: 0,
            extraction: ExtractionMode::Stub,
            load_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("model {0} not found in store")]
    ModelNotFound(String),
    #[error("model {0} failed checksum verification; refusing to start")]
    ChecksumMismatch(String),
    #[error("stub extraction needs --store and --model-id")]
    MissingModel,
    #[error("model artifact is not a valid pattern file: {0}")]
    BadPatternFile(String),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct PredictorState {
    ready: AtomicBool,
    rules: std::sync::OnceLock<Option<PatternRules>>,
    latency: LatencyModel,
    latency_seed: u64,
    request_counter: AtomicU64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictSentence {
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictRequest {
    pub sentences: Vec<PredictSentence>,
}

async fn health(State(state): State<Arc<PredictorState>>) -> Response {
    if state.ready.load(Ordering::Acquire) {
        (StatusCode::OK, "ready").into_response()
    } else {
        (StatusCode::SERVICE_UNAVAILABLE, "loading").into_response()
    }
}

async fn predict(
    State(state): State<Arc<PredictorState>>,
    payload: Result<Json<PredictRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    if !state.ready.load(Ordering::Acquire) {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({"error": "model not loaded"})),
        )
            .into_response();
    }
    let Ok(Json(request)) = payload else {
        return (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({"error": "malformed payload"})),
        )
            .into_response();
    };
    if request.sentences.is_empty() {
        return (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({"error": "malformed payload: no sentences"})),
        )
            .into_response();
    }

    let started = Instant::now();
    let index = state.request_counter.fetch_add(1, Ordering::Relaxed);
    let delay = state.latency.sample(state.latency_seed, index);
    if delay > 0.0 {
        tokio::time::sleep(Duration::from_secs_f64(delay)).await;
    }

    let sentences: Vec<(String, usize)> = request
        .sentences
        .into_iter()
        .map(|s| (s.text, s.index))
        .collect();
    let fields = match state.rules.get().and_then(|r| r.as_ref()) {
        Some(rules) => rules.extract(&sentences),
        None => Default::default(),
    };
    Json(NerResult {
        fields,
        timing_s: started.elapsed().as_secs_f64(),
    })
    .into_response()
}

/// Binds the service, loads and verifies the model artifact, then flips
/// health to ready. Startup fails (and the process should exit nonzero)
/// when the artifact is missing or corrupt.
pub async fn startup(config: PredictorConfig) -> Result<RunningPredictor, PredictorError> {
    let state = Arc::new(PredictorState {
        ready: AtomicBool::new(false),
        rules: std::sync::OnceLock::new(),
        latency: config.latency,
        latency_seed: config.latency_seed,
        request_counter: AtomicU64::new(0),
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .with_state(Arc::clone(&state));
    let service = serve_app(config.listen, app).await?;

    if config.load_delay > Duration::ZERO {
        tokio::time::sleep(config.load_delay).await;
    }

    // Fetch and verify the artifact before reporting healthy.
    let rules = match (&config.store_root, &config.model_id) {
        (Some(root), Some(model_id)) => {
            let store = ModelStore::open(root).map_err(PredictorError::Store)?;
            let bytes = store.get_file(model_id).map_err(|e| match e {
                StoreError::FileNotFound(id) => PredictorError::ModelNotFound(id),
                StoreError::ChecksumMismatch { file_id } => {
                    PredictorError::ChecksumMismatch(file_id)
                }
                StoreError::MissingChunk { file_id, .. } => {
                    PredictorError::ChecksumMismatch(file_id)
                }
                other => PredictorError::Store(other),
            })?;
            if config.extraction == ExtractionMode::Stub {
                let text = String::from_utf8(bytes)
                    .map_err(|_| PredictorError::BadPatternFile("not utf-8".into()))?;
                Some(
                    PatternRules::parse(config.kind, &text)
                        .map_err(|e| PredictorError::BadPatternFile(e.to_string()))?,
                )
            } else {
                None
            }
        }
        (_, None) if config.extraction == ExtractionMode::Stub => {
            service.abort();
            return Err(PredictorError::MissingModel);
        }
        _ => None,
    };
    state.rules.set(rules).ok();
    state.ready.store(true, Ordering::Release);
    Ok(RunningPredictor {
        addr: service.addr,
        service,
    })
}

pub struct RunningPredictor {
    pub addr: SocketAddr,
    service: RunningService,
}

impl std::fmt::Debug for RunningPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunningPredictor")
            .field("addr", &self.addr)
            .finish()
    }
}

impl RunningPredictor {
    pub fn abort(&self) {
        self.service.abort();
    }

    pub async fn join(self) {
        self.service.join().await;
    }
}
