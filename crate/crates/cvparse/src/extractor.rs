//! Text extraction service and the pluggable extractor seam. The bundled
//! extractor passes plain text through unchanged; richer document formats
//! plug in behind the same endpoint. An optional fixed delay simulates the
//! cost of a real extraction backend.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::svc::{serve_app, RunningService};

#[derive(Debug, Clone)]
pub struct ExtractorConfig {
    pub listen: SocketAddr,
    pub delay: Duration,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExtractError {
    #[error("unsupported content type {0:?}")]
    UnsupportedContentType(String),
    #[error("body is not valid utf-8 text")]
    InvalidUtf8,
}

/// The bundled pass-through extractor: plain text in, plain text out.
pub fn extract_text(content_type: Option<&str>, body: &[u8]) -> Result<String, ExtractError> {
    let ct = content_type.unwrap_or("text/plain");
    let base = ct.split(';').next().unwrap_or(ct).trim();
    if !(base.is_empty() || base.eq_ignore_ascii_case("text/plain")) {
        return Err(ExtractError::UnsupportedContentType(base.to_string()));
    }
    String::from_utf8(body.to_vec()).map_err(|_| ExtractError::InvalidUtf8)
}

#[derive(Serialize, Deserialize)]
pub struct ExtractResponse {
    pub text: String,
}

struct ExtractorState {
    delay: Duration,
}

async fn health() -> &'static str {
    "ok"
}

async fn extract(
    State(state): State<Arc<ExtractorState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if state.delay > Duration::ZERO {
        tokio::time::sleep(state.delay).await;
    }
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok());
    match extract_text(content_type, &body) {
        Ok(text) => Json(ExtractResponse { text }).into_response(),
        Err(e @ ExtractError::UnsupportedContentType(_)) => (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            Json(serde_json::json!({"error": e.to_string()})),
        )
            .into_response(),
        Err(e) => (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({"error": e.to_string()})),
        )
            .into_response(),
    }
}

pub async fn bind(config: ExtractorConfig) -> std::io::Result<RunningService> {
    let state = Arc::new(ExtractorState {
        delay: config.delay,
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/extract", post(extract))
        .with_state(state);
    serve_app(config.listen, app).await
}
