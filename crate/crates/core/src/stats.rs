//! Offline statistics over gateway timing logs and load-test samples: per
//! stage summary rows, parallel-vs-sequential comparison, and percentile
//! tables per concurrency level.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::routing::LogRecord;

/// Summary statistics for one stage, in seconds. Percentiles use linear
/// interpolation between closest ranks; std is the sample standard
/// deviation (zero for a single observation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Median parse and service times per mode, plus the services-stage speedup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub t_parallel_median_s: f64,
    pub t_sequential_median_s: f64,
    pub services_parallel_median_s: f64,
    pub services_sequential_median_s: f64,
    /// services_sequential_median / services_parallel_median.
    pub speedup_services: f64,
}

/// One row of the response-time percentile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub concurrency: u32,
    pub average: f64,
    pub p100: f64,
    pub p95: f64,
    pub p90: f64,
    pub p75: f64,
    pub p50: f64,
    pub p25: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    EmptyLog,
    EmptyInput,
    /// The two logs do not cover the same documents.
    CorpusMismatch,
}

impl core::fmt::Display for StatsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StatsError::EmptyLog => write!(f, "log contains no parse records"),
            StatsError::EmptyInput => write!(f, "no samples to summarize"),
            StatsError::CorpusMismatch => {
                write!(f, "parallel and sequential logs cover different documents")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StatsError {}

/// Percentile by linear interpolation between closest ranks over a sorted
/// slice; p in [0, 100].
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarizes a non-empty sample; `None` when empty.
pub fn stat_row(values: &[f64]) -> Option<StatRow> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std = if sorted.len() < 2 {
        0.0
    } else {
        let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1.0))
    };
    Some(StatRow {
        mean,
        std,
        min: sorted[0],
        p25: percentile_sorted(&sorted, 25.0),
        p50: percentile_sorted(&sorted, 50.0),
        p75: percentile_sorted(&sorted, 75.0),
        max: sorted[sorted.len() - 1],
    })
}

/// The stage key order used in reports.
pub const STAGE_KEYS: [&str; 5] = ["extract", "sectioning", "embedding", "services", "total"];

/// Per-stage summary over all records. Besides the five pipeline stages,
/// per-service call times appear under `service:<kind>` keys.
pub fn stage_stats(records: &[LogRecord]) -> Result<BTreeMap<String, StatRow>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyLog);
    }
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in records {
        let t = &record.timings;
        for (key, value) in [
            ("extract", t.extract_s),
            ("sectioning", t.sectioning_s),
            ("embedding", t.embedding_s),
            ("services", t.services_s),
            ("total", t.total_s),
        ] {
            series.entry(key.to_string()).or_default().push(value);
        }
        for (kind, &value) in &t.per_service_s {
            series
                .entry(alloc::format!("service:{kind}"))
                .or_default()
                .push(value);
        }
    }
    Ok(series
        .into_iter()
        .map(|(key, values)| {
            let row = stat_row(&values).expect("series never empty");
            (key, row)
        })
        .collect())
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    percentile_sorted(values, 50.0)
}

/// Compares the two calling modes over the same document corpus.
pub fn compare_modes(
    parallel: &[LogRecord],
    sequential: &[LogRecord],
) -> Result<ComparisonSummary, StatsError> {
    if parallel.is_empty() || sequential.is_empty() {
        return Err(StatsError::EmptyLog);
    }
    let ids = |records: &[LogRecord]| -> BTreeSet<String> {
        records.iter().map(|r| r.doc_id.clone()).collect()
    };
    if ids(parallel) != ids(sequential) {
        return Err(StatsError::CorpusMismatch);
    }
    let mut par_total: Vec<f64> = parallel.iter().map(|r| r.timings.total_s).collect();
    let mut seq_total: Vec<f64> = sequential.iter().map(|r| r.timings.total_s).collect();
    let mut par_services: Vec<f64> = parallel.iter().map(|r| r.timings.services_s).collect();
    let mut seq_services: Vec<f64> = sequential.iter().map(|r| r.timings.services_s).collect();
    let services_parallel_median_s = median_of(&mut par_services);
    let services_sequential_median_s = median_of(&mut seq_services);
    Ok(ComparisonSummary {
        t_parallel_median_s: median_of(&mut par_total),
        t_sequential_median_s: median_of(&mut seq_total),
        services_parallel_median_s,
        services_sequential_median_s,
        speedup_services: services_sequential_median_s / services_parallel_median_s,
    })
}

/// Builds one percentile row per concurrency level from raw response-time
/// samples (seconds).
pub fn percentile_table(results: &[(u32, Vec<f64>)]) -> Result<Vec<PercentileRow>, StatsError> {
    if results.is_empty() || results.iter().any(|(_, samples)| samples.is_empty()) {
        return Err(StatsError::EmptyInput);
    }
    Ok(results
        .iter()
        .map(|(concurrency, samples)| {
            let mut sorted = samples.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            let average = sorted.iter().sum::<f64>() / sorted.len() as f64;
            PercentileRow {
                concurrency: *concurrency,
                average,
                p100: percentile_sorted(&sorted, 100.0),
                p95: percentile_sorted(&sorted, 95.0),
                p90: percentile_sorted(&sorted, 90.0),
                p75: percentile_sorted(&sorted, 75.0),
                p50: percentile_sorted(&sorted, 50.0),
                p25: percentile_sorted(&sorted, 25.0),
            }
        })
        .collect())
}
