//! Aggregation of per-request load-test samples into the six selection
//! metrics. The HTTP client that produces the samples lives in the `cvparse`
//! crate; this module is the pure measurement contract.

use serde::{Deserialize, Serialize};

/// One completed (or failed) request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestSample {
    /// Request write start to final body byte, in seconds.
    pub latency_s: f64,
    /// Response bytes received over the wire (status line, headers and body).
    pub bytes_received: u64,
    /// HTTP status, or 0 when the request never produced a response.
    pub status: u16,
    pub failed: bool,
}

/// The aggregated report for one run.
///
/// `requests_per_second * time_taken_for_tests_s == n_requests` and
/// `transfer_rate_bytes_per_s * time_taken_for_tests_s == total_transferred`
/// hold by construction; a run is only usable as AHP input when
/// `failed_requests` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_requests: u64,
    pub concurrency: u32,
    pub requests_per_second: f64,
    /// Mean request latency across all samples, in milliseconds.
    pub time_per_request_ms: f64,
    /// wall_time * concurrency / n_requests, in milliseconds.
    pub time_per_concurrent_request_ms: f64,
    /// Wall time from first connection to last response, in seconds.
    pub time_taken_for_tests_s: f64,
    pub total_transferred: u64,
    pub transfer_rate_bytes_per_s: f64,
    pub failed_requests: u64,
}

impl BenchReport {
    pub fn ahp_eligible(&self) -> bool {
        self.failed_requests == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchStatError {
    EmptySamples,
    NonPositiveWallTime,
}

impl core::fmt::Display for BenchStatError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BenchStatError::EmptySamples => write!(f, "no samples to aggregate"),
            BenchStatError::NonPositiveWallTime => write!(f, "wall time must be positive"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BenchStatError {}

/// Pure aggregation of samples plus wall time into a report. Deterministic
/// and independent of sample order.
pub fn compute_report(
    samples: &[RequestSample],
    wall_time_s: f64,
    concurrency: u32,
) -> Result<BenchReport, BenchStatError> {
    if samples.is_empty() {
        return Err(BenchStatError::EmptySamples);
    }
    if !wall_time_s.is_finite() || wall_time_s <= 0.0 {
        return Err(BenchStatError::NonPositiveWallTime);
    }
    let n = samples.len() as u64;
    let mut latency_sum = 0.0;
    let mut total_bytes: u64 = 0;
    let mut failed: u64 = 0;
    for s in samples {
        latency_sum += s.latency_s;
        total_bytes += s.bytes_received;
        if s.failed {
            failed += 1;
        }
    }
    Ok(BenchReport {
        n_requests: n,
        concurrency,
        requests_per_second: n as f64 / wall_time_s,
        time_per_request_ms: latency_sum / n as f64 * 1000.0,
        time_per_concurrent_request_ms: wall_time_s * concurrency as f64 / n as f64 * 1000.0,
        time_taken_for_tests_s: wall_time_s,
        total_transferred: total_bytes,
        transfer_rate_bytes_per_s: total_bytes as f64 / wall_time_s,
        failed_requests: failed,
    })
}
