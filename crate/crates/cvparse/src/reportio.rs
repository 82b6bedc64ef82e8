//! Reading gateway timing logs and bench run files, and rendering the
//! statistics tables (text, CSV and boxplot five-number JSON).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cvparse_core::routing::LogRecord;
use cvparse_core::stats::{ComparisonSummary, PercentileRow, StatRow, STAGE_KEYS};

#[derive(Debug, thiserror::Error)]
pub enum ReportIoError {
    #[error("{path} line {line}: {source}")]
    BadRecord {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a JSON-lines timing log.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, ReportIoError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| ReportIoError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Stage keys in display order: the five pipeline stages first, then any
/// per-service keys alphabetically.
fn ordered_keys(stats: &BTreeMap<String, StatRow>) -> Vec<&str> {
    let mut keys: Vec<&str> = STAGE_KEYS
        .iter()
        .copied()
        .filter(|k| stats.contains_key(*k))
        .collect();
    keys.extend(
        stats
            .keys()
            .map(String::as_str)
            .filter(|k| !STAGE_KEYS.contains(k)),
    );
    keys
}

const STAT_NAMES: [&str; 7] = ["mean", "std", "min", "25%", "50%", "75%", "max"];

fn stat_values(row: &StatRow) -> [f64; 7] {
    [
        row.mean, row.std, row.min, row.p25, row.p50, row.p75, row.max,
    ]
}

/// Stats-as-rows, stages-as-columns table (seconds).
pub fn render_stage_table(stats: &BTreeMap<String, StatRow>) -> String {
    let keys = ordered_keys(stats);
    let width = keys.iter().map(|k| k.len()).max().unwrap_or(8).max(8) + 2;
    let mut out = format!("{:<6}", "");
    for key in &keys {
        out.push_str(&format!("{key:>width$}"));
    }
    out.push('\n');
    for (i, name) in STAT_NAMES.iter().enumerate() {
        out.push_str(&format!("{name:<6}"));
        for key in &keys {
            let value = stat_values(&stats[*key])[i];
            out.push_str(&format!("{value:>width$.3}"));
        }
        out.push('\n');
    }
    out
}

pub fn render_stage_csv(stats: &BTreeMap<String, StatRow>) -> String {
    let keys = ordered_keys(stats);
    let mut out = String::from("stat");
    for key in &keys {
        out.push(',');
        out.push_str(key);
    }
    out.push('\n');
    for (i, name) in STAT_NAMES.iter().enumerate() {
        out.push_str(name);
        for key in &keys {
            out.push_str(&format!(",{:.6}", stat_values(&stats[*key])[i]));
        }
        out.push('\n');
    }
    out
}

/// Boxplot five-number summaries as JSON, for external plotting.
pub fn plot_data_json(stats: &BTreeMap<String, StatRow>) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (key, row) in stats {
        map.insert(
            key.clone(),
            serde_json::json!({
                "min": row.min,
                "p25": row.p25,
                "p50": row.p50,
                "p75": row.p75,
                "max": row.max,
            }),
        );
    }
    serde_json::Value::Object(map)
}

pub fn render_comparison(summary: &ComparisonSummary) -> String {
    format!(
        "                       parallel  sequential\n\
         total median (s)      {:>8.3}  {:>10.3}\n\
         services median (s)   {:>8.3}  {:>10.3}\n\
         \nservices speedup: {:.2}x\n",
        summary.t_parallel_median_s,
        summary.t_sequential_median_s,
        summary.services_parallel_median_s,
        summary.services_sequential_median_s,
        summary.speedup_services,
    )
}

pub fn render_percentile_table(rows: &[PercentileRow]) -> String {
    let mut out = format!(
        "{:>11} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "concurrency", "average", "100th", "95th", "90th", "75th", "50th", "25th"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>11} {:>9.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
            r.concurrency, r.average, r.p100, r.p95, r.p90, r.p75, r.p50, r.p25
        ));
    }
    out
}

pub fn render_percentile_csv(rows: &[PercentileRow]) -> String {
    let mut out = String::from("concurrency,average,p100,p95,p90,p75,p50,p25\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.concurrency, r.average, r.p100, r.p95, r.p90, r.p75, r.p50, r.p25
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvparse_core::routing::{ParseMode, StageTimings};
    use cvparse_core::stats::stage_stats;

    fn write_log(lines: &[LogRecord]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("timing.log");
        let text: String = lines
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    fn record(doc: &str, services: f64) -> LogRecord {
        LogRecord {
            doc_id: doc.into(),
            mode: ParseMode::Parallel,
            timings: StageTimings {
                extract_s: 0.04,
                sectioning_s: 0.02,
                embedding_s: 0.2,
                services_s: services,
                total_s: services + 0.26,
                per_service_s: BTreeMap::new(),
            },
            warnings: vec![],
        }
    }

    #[test]
    fn log_round_trip() {
        let records = vec![record("a", 0.5), record("b", 0.6)];
        let (_dir, path) = write_log(&records);
        let loaded = read_log(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn malformed_lines_are_reported_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.log");
        fs::write(&path, "{\"nope\": 1}\n").unwrap();
        let err = read_log(&path).unwrap_err();
        assert!(matches!(err, ReportIoError::BadRecord { line: 1, .. }));
    }

    #[test]
    fn tables_render_all_stages() {
        let records = vec![record("a", 0.5), record("b", 0.7)];
        let stats = stage_stats(&records).unwrap();
        let table = render_stage_table(&stats);
        for key in STAGE_KEYS {
            assert!(table.contains(key), "missing {key} in:\n{table}");
        }
        let csv = render_stage_csv(&stats);
        assert!(csv.starts_with("stat,extract,sectioning,embedding,services,total"));
        assert_eq!(csv.lines().count(), 8);

        let plot = plot_data_json(&stats);
        assert!((plot["services"]["p50"].as_f64().unwrap() - 0.6).abs() < 1e-9);
    }
}
