//! Sentence embedding service: serves 768-component vectors for batches of
//! sentences. Backed by the deterministic keyword provider (or a replayed
//! embedding file); an optional delay simulates a heavyweight encoder.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cvparse_core::segmenter::EmbeddingProvider;
use serde::{Deserialize, Serialize};

use crate::svc::{serve_app, RunningService};

pub struct EmbedderConfig {
    pub listen: SocketAddr,
    pub provider: Arc<dyn EmbeddingProvider + Send + Sync>,
    pub delay: Duration,
}

#[derive(Serialize, Deserialize)]
pub struct EmbedRequest {
    pub sentences: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

struct EmbedderState {
    provider: Arc<dyn EmbeddingProvider + Send + Sync>,
    delay: Duration,
}

async fn health() -> &'static str {
    "ok"
}

async fn embed(
    State(state): State<Arc<EmbedderState>>,
    Json(request): Json<EmbedRequest>,
) -> Response {
    if request.sentences.is_empty() {
        return (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({"error": "no sentences"})),
        )
            .into_response();
    }
    if state.delay > Duration::ZERO {
        tokio::time::sleep(state.delay).await;
    }
    let mut embeddings = Vec::with_capacity(request.sentences.len());
    for sentence in &request.sentences {
        match state.provider.embed(sentence) {
            Ok(v) => embeddings.push(v),
            Err(e) => {
                return (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    Json(serde_json::json!({"error": e.to_string()})),
                )
                    .into_response()
            }
        }
    }
    Json(EmbedResponse { embeddings }).into_response()
}

pub async fn bind(config: EmbedderConfig) -> std::io::Result<RunningService> {
    let state = Arc::new(EmbedderState {
        provider: config.provider,
        delay: config.delay,
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/embed", post(embed))
        .with_state(state);
    serve_app(config.listen, app).await
}
