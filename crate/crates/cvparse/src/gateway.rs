//! The parse gateway: accepts a document, extracts text, sections the
//! sentences, fans them out to the five section predictors (in parallel or
//! sequentially) and merges the results into one structured response with
//! per-stage timings. One structured timing record is logged per request.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cvparse_core::ner::{NerResult, SectionKind};
use cvparse_core::routing::{
    failure_warning, merge, LogRecord, ParseMode, ParsedDocument, RoutingTable, StageTimings,
};
use cvparse_core::segmenter::{
    classify_sentences, split_sentences, DenseClassifier, EmbeddingProvider,
};
use sha2::{Digest, Sha256};
use url::Url;

use crate::embedder::{EmbedRequest, EmbedResponse};
use crate::extractor::{extract_text, ExtractResponse};
use crate::predictor::{PredictRequest, PredictSentence};
use crate::svc::{serve_app, RunningService};

pub const DEFAULT_FANOUT_TIMEOUT: Duration = Duration::from_secs(10);

pub struct GatewayConfig {
    pub listen: SocketAddr,
    /// One endpoint per section kind; all five must be present.
    pub predictors: BTreeMap<SectionKind, Url>,
    /// Remote extractor; the built-in plain-text extractor when absent.
    pub extractor_url: Option<Url>,
    /// Remote embedder; the local provider when absent.
    pub embedder_url: Option<Url>,
    pub provider: Arc<dyn EmbeddingProvider + Send + Sync>,
    pub classifier: Arc<DenseClassifier>,
    pub routing: RoutingTable,
    pub fanout_timeout: Duration,
    /// Artificial sectioning-stage delay (stage stub for experiments).
    pub sectioning_delay: Duration,
    /// Maximum concurrently processed parses; 0 means unlimited.
    pub workers: usize,
    pub timing_log: Option<PathBuf>,
}

impl GatewayConfig {
    pub fn new(listen: SocketAddr, predictors: BTreeMap<SectionKind, Url>) -> Self {
        Self {
            listen,
            predictors,
            extractor_url: None,
            embedder_url: None,
            provider: Arc::new(cvparse_core::segmenter::KeywordProvider::builtin()),
            classifier: Arc::new(DenseClassifier::keyword_router()),
            routing: RoutingTable::standard(),
            fanout_timeout: DEFAULT_FANOUT_TIMEOUT,
            sectioning_delay: Duration::ZERO,
            workers: 0,
            timing_log: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("gateway needs an endpoint for every section kind; missing {0}")]
    MissingPredictor(SectionKind),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct GatewayState {
    predictors: BTreeMap<SectionKind, Url>,
    extractor_url: Option<Url>,
    embedder_url: Option<Url>,
    provider: Arc<dyn EmbeddingProvider + Send + Sync>,
    classifier: Arc<DenseClassifier>,
    routing: RoutingTable,
    fanout_timeout: Duration,
    sectioning_delay: Duration,
    client: reqwest::Client,
    semaphore: Option<tokio::sync::Semaphore>,
    log: Option<Mutex<std::fs::File>>,
}

/// Everything the fan-out stage produced, successes and failures alike.
pub struct FanOutOutcome {
    pub results: BTreeMap<SectionKind, NerResult>,
    pub failures: BTreeMap<SectionKind, String>,
    pub per_service_s: BTreeMap<SectionKind, f64>,
    pub services_s: f64,
}

async fn call_predictor(
    client: &reqwest::Client,
    url: &Url,
    batch: &[(String, usize)],
    timeout: Duration,
) -> (Result<NerResult, String>, f64) {
    let started = Instant::now();
    let request = PredictRequest {
        sentences: batch
            .iter()
            .map(|(text, index)| PredictSentence {
                text: text.clone(),
                index: *index,
            })
            .collect(),
    };
    let endpoint = match url.join("predict") {
        Ok(u) => u,
        Err(e) => return (Err(format!("bad endpoint: {e}")), 0.0),
    };
    let outcome = async {
        let response = client
            .post(endpoint)
            .timeout(timeout)
            .json(&request)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    "timeout".to_string()
                } else {
                    format!("transport: {e}")
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("status {}", status.as_u16()));
        }
        response
            .json::<NerResult>()
            .await
            .map_err(|e| format!("bad response body: {e}"))
    }
    .await;
    (outcome, started.elapsed().as_secs_f64())
}

/// Issues one call per routed kind. Parallel mode starts every call before
/// awaiting any of them; sequential mode walks the kinds in deployment
/// order. A failing call never disturbs its siblings.
pub async fn fan_out(
    client: &reqwest::Client,
    endpoints: &BTreeMap<SectionKind, Url>,
    batches: &BTreeMap<SectionKind, Vec<(String, usize)>>,
    mode: ParseMode,
    timeout: Duration,
) -> FanOutOutcome {
    let started = Instant::now();
    let mut outcome = FanOutOutcome {
        results: BTreeMap::new(),
        failures: BTreeMap::new(),
        per_service_s: BTreeMap::new(),
        services_s: 0.0,
    };
    let kinds: Vec<SectionKind> = SectionKind::ALL
        .iter()
        .copied()
        .filter(|k| batches.contains_key(k))
        .collect();

    match mode {
        ParseMode::Parallel => {
            let calls = kinds.iter().map(|&kind| {
                let batch = &batches[&kind];
                let url = &endpoints[&kind];
                async move { (kind, call_predictor(client, url, batch, timeout).await) }
            });
            for (kind, (result, elapsed)) in futures::future::join_all(calls).await {
                outcome.per_service_s.insert(kind, elapsed);
                match result {
                    Ok(ner) => {
                        outcome.results.insert(kind, ner);
                    }
                    Err(e) => {
                        outcome.failures.insert(kind, e);
                    }
                }
            }
        }
        ParseMode::Sequential => {
            for kind in kinds {
                let (result, elapsed) =
                    call_predictor(client, &endpoints[&kind], &batches[&kind], timeout).await;
                outcome.per_service_s.insert(kind, elapsed);
                match result {
                    Ok(ner) => {
                        outcome.results.insert(kind, ner);
                    }
                    Err(e) => {
                        outcome.failures.insert(kind, e);
                    }
                }
            }
        }
    }
    outcome.services_s = started.elapsed().as_secs_f64();
    outcome
}

fn bad_request(message: impl Into<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(serde_json::json!({"error": message.into()})),
    )
        .into_response()
}

fn bad_gateway(message: impl Into<String>) -> Response {
    (
        StatusCode::BAD_GATEWAY,
        Json(serde_json::json!({"error": message.into()})),
    )
        .into_response()
}

async fn health() -> &'static str {
    "ok"
}

async fn handle_parse(
    State(state): State<Arc<GatewayState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    // Bounded worker pool: requests beyond the limit queue here, before any
    // stage timer starts.
    let _permit = match &state.semaphore {
        Some(semaphore) => Some(semaphore.acquire().await.expect("semaphore never closed")),
        None => None,
    };
    let total_start = Instant::now();

    let mode = match headers
        .get("x-parse-mode")
        .map(|v| v.to_str().unwrap_or(""))
    {
        None => ParseMode::Parallel,
        Some(raw) => match ParseMode::parse(raw) {
            Some(mode) => mode,
            None => return bad_request(format!("invalid X-Parse-Mode {raw:?}")),
        },
    };
    if body.is_empty() {
        return bad_request("unsupported payload: missing body");
    }
    let doc_id = headers
        .get("x-document-id")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .unwrap_or_else(|| hex::encode(&Sha256::digest(&body)[..8]));
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);

    // Stage 1: text extraction.
    let extract_start = Instant::now();
    let text = match &state.extractor_url {
        None => match extract_text(content_type.as_deref(), &body) {
            Ok(text) => text,
            Err(e) => return bad_request(format!("unsupported payload: {e}")),
        },
        Some(url) => {
            let endpoint = url.join("extract").expect("validated at startup");
            let mut request = state.client.post(endpoint).body(body.to_vec());
            if let Some(ct) = &content_type {
                request = request.header(header::CONTENT_TYPE, ct);
            }
            match request.send().await {
                Err(e) => return bad_gateway(format!("extractor unreachable: {e}")),
                Ok(resp) if resp.status() == StatusCode::UNSUPPORTED_MEDIA_TYPE => {
                    return bad_request("unsupported payload: content type")
                }
                Ok(resp) if !resp.status().is_success() => {
                    return bad_request(format!("extractor rejected payload: {}", resp.status()))
                }
                Ok(resp) => match resp.json::<ExtractResponse>().await {
                    Ok(parsed) => parsed.text,
                    Err(e) => return bad_gateway(format!("extractor answer unreadable: {e}")),
                },
            }
        }
    };
    let extract_s = extract_start.elapsed().as_secs_f64();

    let sentences = split_sentences(&text);
    if sentences.is_empty() {
        return bad_request("unsupported payload: no text content");
    }

    // Stage 2: sentence embeddings.
    let embed_start = Instant::now();
    let embeddings: Vec<Vec<f64>> = match &state.embedder_url {
        Some(url) => {
            let endpoint = url.join("embed").expect("validated at startup");
            let request = EmbedRequest {
                sentences: sentences.clone(),
            };
            match state.client.post(endpoint).json(&request).send().await {
                Err(e) => return bad_gateway(format!("embedder unreachable: {e}")),
                Ok(resp) if !resp.status().is_success() => {
                    return bad_gateway(format!("embedder failed: {}", resp.status()))
                }
                Ok(resp) => match resp.json::<EmbedResponse>().await {
                    Ok(parsed) => parsed.embeddings,
                    Err(e) => return bad_gateway(format!("embedder answer unreadable: {e}")),
                },
            }
        }
        None => {
            let mut out = Vec::with_capacity(sentences.len());
            for sentence in &sentences {
                match state.provider.embed(sentence) {
                    Ok(v) => out.push(v),
                    Err(e) => return bad_gateway(format!("embedding provider failed: {e}")),
                }
            }
            out
        }
    };
    let embedding_s = embed_start.elapsed().as_secs_f64();

    // Stage 3: sectioning.
    let sectioning_start = Instant::now();
    if state.sectioning_delay > Duration::ZERO {
        tokio::time::sleep(state.sectioning_delay).await;
    }
    let document = match classify_sentences(&sentences, &embeddings, &state.classifier) {
        Ok(doc) => doc,
        Err(e) => return bad_gateway(format!("sectioning failed: {e}")),
    };
    let sectioning_s = sectioning_start.elapsed().as_secs_f64();

    // Stage 4: fan out to the section services and merge.
    let batches = state.routing.route(&document);
    let outcome = fan_out(
        &state.client,
        &state.predictors,
        &batches,
        mode,
        state.fanout_timeout,
    )
    .await;
    if outcome.results.is_empty() && !batches.is_empty() {
        return (
            StatusCode::BAD_GATEWAY,
            Json(serde_json::json!({
                "error": "all section services failed",
                "failures": outcome.failures,
            })),
        )
            .into_response();
    }
    let categories = if outcome.results.is_empty() {
        BTreeMap::new()
    } else {
        match merge(&outcome.results) {
            Ok(categories) => categories,
            Err(e) => return bad_gateway(format!("merge failed: {e}")),
        }
    };
    let warnings: Vec<String> = outcome
        .failures
        .iter()
        .map(|(kind, error)| failure_warning(*kind, error))
        .collect();

    let timings = StageTimings {
        extract_s,
        sectioning_s,
        embedding_s,
        services_s: outcome.services_s,
        total_s: total_start.elapsed().as_secs_f64(),
        per_service_s: outcome.per_service_s,
    };
    let record = LogRecord {
        doc_id,
        mode,
        timings: timings.clone(),
        warnings: warnings.clone(),
    };
    if let Ok(line) = serde_json::to_string(&record) {
        match &state.log {
            Some(file) => {
                let mut file = file.lock().expect("timing log lock never poisoned");
                let _ = writeln!(file, "{line}");
            }
            None => println!("{line}"),
        }
    }

    Json(ParsedDocument {
        categories,
        timings,
        warnings,
    })
    .into_response()
}

pub async fn bind(config: GatewayConfig) -> Result<RunningService, GatewayError> {
    for kind in SectionKind::ALL {
        if !config.predictors.contains_key(&kind) {
            return Err(GatewayError::MissingPredictor(kind));
        }
    }
    let log = match &config.timing_log {
        Some(path) => Some(Mutex::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?,
        )),
        None => None,
    };
    let state = Arc::new(GatewayState {
        predictors: config.predictors,
        extractor_url: config.extractor_url,
        embedder_url: config.embedder_url,
        provider: config.provider,
        classifier: config.classifier,
        routing: config.routing,
        fanout_timeout: config.fanout_timeout,
        sectioning_delay: config.sectioning_delay,
        client: reqwest::Client::new(),
        semaphore: (config.workers > 0).then(|| tokio::sync::Semaphore::new(config.workers)),
        log,
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/parse", post(handle_parse))
        .with_state(state);
    Ok(serve_app(config.listen, app).await?)
}
