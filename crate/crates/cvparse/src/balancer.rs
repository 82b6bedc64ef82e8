//! The upstream reverse proxy: round-robin over primaries with windowed
//! failure accounting and a backup tier, per the pool semantics in
//! [`cvparse_core::upstream`]. Requests are retried on the next available
//! server up to one attempt per pool member.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use cvparse_core::upstream::{UpstreamConfig, UpstreamError, UpstreamState};

use crate::svc::{serve_app, RunningService};

pub const DEFAULT_ATTEMPT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone)]
pub struct BalancerConfig {
    pub listen: SocketAddr,
    pub upstream: UpstreamConfig,
    pub attempt_timeout: Duration,
    pub access_log: Option<PathBuf>,
}

struct BalancerState {
    pool: Mutex<UpstreamState>,
    client: reqwest::Client,
    started: Instant,
    attempt_timeout: Duration,
    log: Option<Mutex<std::fs::File>>,
}

impl BalancerState {
    fn now_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn access_log(&self, backend: &str, attempts: usize, status: u16, latency: Duration) {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let line = format!(
            "{ts:.3} backend={backend} attempts={attempts} status={status} latency_ms={:.1}",
            latency.as_secs_f64() * 1000.0
        );
        match &self.log {
            Some(file) => {
                let mut file = file.lock().expect("access log lock never poisoned");
                let _ = writeln!(file, "{line}");
            }
            None => log::info!("{line}"),
        }
    }
}

/// Headers that must not be forwarded verbatim in either direction.
fn is_hop_by_hop(name: &str) -> bool {
    matches!(
        name.to_ascii_lowercase().as_str(),
        "connection"
            | "keep-alive"
            | "transfer-encoding"
            | "upgrade"
            | "host"
            | "content-length"
            | "proxy-authenticate"
            | "proxy-authorization"
            | "te"
            | "trailer"
    )
}

enum Attempt {
    /// The backend answered (anything below 500 counts as answered).
    Answered(Response),
    /// Connect error, timeout or 5xx.
    Failed(String),
}

async fn try_backend(
    state: &BalancerState,
    backend: &str,
    method: &Method,
    uri: &Uri,
    headers: &HeaderMap,
    body: &Bytes,
) -> Attempt {
    let path_and_query = uri.path_and_query().map(|p| p.as_str()).unwrap_or("/");
    let url = format!("http://{backend}{path_and_query}");
    let reqwest_method = match reqwest::Method::from_bytes(method.as_str().as_bytes()) {
        Ok(m) => m,
        Err(_) => return Attempt::Failed("unsupported method".into()),
    };
    let mut request = state
        .client
        .request(reqwest_method, &url)
        .timeout(state.attempt_timeout)
        .body(body.to_vec());
    for (name, value) in headers {
        if !is_hop_by_hop(name.as_str()) {
            request = request.header(name, value);
        }
    }
    match request.send().await {
        Err(e) => Attempt::Failed(if e.is_timeout() {
            "timeout".into()
        } else {
            format!("connect: {e}")
        }),
        Ok(response) => {
            let status = response.status();
            if status.as_u16() >= 500 {
                return Attempt::Failed(format!("status {}", status.as_u16()));
            }
            let mut builder = Response::builder().status(status);
            for (name, value) in response.headers() {
                if !is_hop_by_hop(name.as_str()) {
                    builder = builder.header(name, value);
                }
            }
            let bytes = match response.bytes().await {
                Ok(b) => b,
                Err(e) => return Attempt::Failed(format!("read body: {e}")),
            };
            match builder.body(axum::body::Body::from(bytes)) {
                Ok(resp) => Attempt::Answered(resp),
                Err(e) => Attempt::Failed(format!("relay: {e}")),
            }
        }
    }
}

async fn proxy(
    State(state): State<Arc<BalancerState>>,
    request: axum::extract::Request,
) -> Response {
    let started = Instant::now();
    let (parts, body) = request.into_parts();
    let body = match axum::body::to_bytes(body, 64 * 1024 * 1024).await {
        Ok(b) => b,
        Err(_) => {
            return (StatusCode::PAYLOAD_TOO_LARGE, "body too large").into_response();
        }
    };

    let n_servers = {
        let pool = state.pool.lock().expect("pool lock never poisoned");
        pool.config().servers.len()
    };
    let mut attempts = 0usize;
    let mut last_backend = String::from("-");
    while attempts < n_servers {
        let picked = {
            let mut pool = state.pool.lock().expect("pool lock never poisoned");
            let now = state.now_ms();
            pool.pick_server(now).map(|i| pool.address(i).to_string())
        };
        let backend = match picked {
            Ok(addr) => addr,
            Err(UpstreamError::NoServerAvailable) => {
                state.access_log("-", attempts, 503, started.elapsed());
                return (
                    StatusCode::SERVICE_UNAVAILABLE,
                    Json(serde_json::json!({"error": "no server available"})),
                )
                    .into_response();
            }
            Err(e) => {
                return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response();
            }
        };
        attempts += 1;
        last_backend = backend.clone();
        let attempt = try_backend(
            &state,
            &backend,
            &parts.method,
            &parts.uri,
            &parts.headers,
            &body,
        )
        .await;
        let success = matches!(attempt, Attempt::Answered(_));
        {
            let mut pool = state.pool.lock().expect("pool lock never poisoned");
            let now = state.now_ms();
            let _ = pool.record_result(&backend, success, now);
        }
        match attempt {
            Attempt::Answered(response) => {
                state.access_log(
                    &backend,
                    attempts,
                    response.status().as_u16(),
                    started.elapsed(),
                );
                return response;
            }
            Attempt::Failed(reason) => {
                log::debug!("backend {backend} failed: {reason}");
            }
        }
    }
    state.access_log(&last_backend, attempts, 502, started.elapsed());
    (
        StatusCode::BAD_GATEWAY,
        Json(serde_json::json!({"error": "bad gateway", "attempts": attempts})),
    )
        .into_response()
}

pub async fn bind(config: BalancerConfig) -> anyhow::Result<RunningService> {
    let log = match &config.access_log {
        Some(path) => Some(Mutex::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?,
        )),
        None => None,
    };
    let client = reqwest::Client::builder()
        .pool_max_idle_per_host(config.upstream.keepalive as usize)
        .build()?;
    let state = Arc::new(BalancerState {
        pool: Mutex::new(UpstreamState::new(config.upstream)),
        client,
        started: Instant::now(),
        attempt_timeout: config.attempt_timeout,
        log,
    });
    let app = Router::new().fallback(proxy).with_state(state);
    Ok(serve_app(config.listen, app).await?)
}
