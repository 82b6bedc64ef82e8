//! The load benchmark runner: N requests at concurrency C against one URL,
//! aggregated into the six selection metrics. Exactly min(C, remaining)
//! requests are in flight at any time; connections are fresh per request
//! unless keep-alive is enabled.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cvparse_core::benchstat::{compute_report, BenchReport, BenchStatError, RequestSample};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::httpc::{build_request, Connection, HttpClientError, HttpTarget};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub url: Url,
    pub n_requests: u64,
    pub concurrency: u32,
    pub method: Method,
    pub body: Option<Vec<u8>>,
    pub headers: Vec<(String, String)>,
    pub per_request_timeout: Duration,
    pub keep_alive: bool,
}

impl BenchConfig {
    pub fn new(url: Url, n_requests: u64, concurrency: u32) -> Self {
        Self {
            url,
            n_requests,
            concurrency,
            method: Method::Get,
            body: None,
            headers: Vec::new(),
            per_request_timeout: DEFAULT_TIMEOUT,
            keep_alive: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error(transparent)]
    Client(#[from] HttpClientError),
    #[error(transparent)]
    Stat(#[from] BenchStatError),
}

/// Full outcome of a run: the aggregate report plus raw per-request
/// latencies for percentile analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub report: BenchReport,
    pub latencies_s: Vec<f64>,
}

async fn perform_one(
    conn_slot: &mut Option<Connection>,
    target: &HttpTarget,
    request: &[u8],
    keep_alive: bool,
    timeout: Duration,
) -> RequestSample {
    let started = Instant::now();
    let attempt = async {
        if conn_slot.is_none() {
            *conn_slot = Some(Connection::new(target.connect(timeout).await?));
        }
        let conn = conn_slot.as_mut().expect("connection just ensured");
        conn.send(request).await?;
        conn.read_response().await
    };
    match tokio::time::timeout(timeout, attempt).await {
        Ok(Ok(summary)) => {
            if !(keep_alive && summary.may_reuse) {
                *conn_slot = None;
            }
            RequestSample {
                latency_s: started.elapsed().as_secs_f64(),
                bytes_received: summary.wire_bytes,
                status: summary.status,
                failed: !(200..400).contains(&summary.status),
            }
        }
        Ok(Err(_)) | Err(_) => {
            *conn_slot = None;
            RequestSample {
                latency_s: started.elapsed().as_secs_f64(),
                bytes_received: 0,
                status: 0,
                failed: true,
            }
        }
    }
}

/// Runs the benchmark. Fails fast with `TargetUnreachable` when the very
/// first connection cannot be established; later per-request failures are
/// reported in `failed_requests` instead.
pub async fn run_bench(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    if config.n_requests < 1 {
        return Err(BenchError::InvalidConfig(
            "need at least one request".into(),
        ));
    }
    if config.concurrency < 1 || config.concurrency as u64 > config.n_requests {
        return Err(BenchError::InvalidConfig(
            "concurrency must be in 1..=n_requests".into(),
        ));
    }
    let target = HttpTarget::from_url(&config.url)?;
    let request = Arc::new(build_request(
        config.method.as_str(),
        &target,
        &config.headers,
        config.body.as_deref(),
        config.keep_alive,
    ));

    // Preflight probe: a target that refuses the first connection is an
    // error, not ten thousand failed samples.
    drop(
        target
            .connect(config.per_request_timeout)
            .await
            .map_err(|e| BenchError::TargetUnreachable(e.to_string()))?,
    );

    let next = Arc::new(AtomicU64::new(0));
    let started = Instant::now();
    let mut workers = Vec::with_capacity(config.concurrency as usize);
    for _ in 0..config.concurrency {
        let next = Arc::clone(&next);
        let request = Arc::clone(&request);
        let target = target.clone();
        let n = config.n_requests;
        let keep_alive = config.keep_alive;
        let timeout = config.per_request_timeout;
        workers.push(tokio::spawn(async move {
            let mut conn: Option<Connection> = None;
            let mut samples = Vec::new();
            while next.fetch_add(1, Ordering::Relaxed) < n {
                samples.push(perform_one(&mut conn, &target, &request, keep_alive, timeout).await);
            }
            samples
        }));
    }
    let mut samples = Vec::with_capacity(config.n_requests as usize);
    for worker in workers {
        samples.extend(worker.await.expect("bench worker never panics"));
    }
    let wall = started.elapsed().as_secs_f64();

    let report = compute_report(&samples, wall, config.concurrency)?;
    let latencies_s = samples.iter().map(|s| s.latency_s).collect();
    Ok(BenchOutcome {
        report,
        latencies_s,
    })
}

/// The JSON document the bench CLI writes; the report tool consumes these
/// for percentile tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRunFile {
    pub url: String,
    pub concurrency: u32,
    pub report: BenchReport,
    pub latencies_s: Vec<f64>,
}
