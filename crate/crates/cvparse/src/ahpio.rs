//! Measurement file parsing and result rendering for the selection CLI.
//!
//! A measurement file is a line-oriented table: the first data line names
//! the alternatives; every following line is one criterion row of
//! `name direction value...` with direction `lower` or `higher`. `#` starts
//! a comment.

use cvparse_core::ahp::AhpResult;

pub use cvparse_core::ahp::{Criterion, Direction, MeasurementTable};

#[derive(Debug, thiserror::Error)]
pub enum MeasurementParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("file has no data lines")]
    Empty,
    #[error(transparent)]
    Ahp(#[from] cvparse_core::ahp::AhpError),
}

/// Parses the line-oriented measurement table format.
pub fn parse_measurement_file(text: &str) -> Result<MeasurementTable, MeasurementParseError> {
    let mut alternatives: Option<Vec<String>> = None;
    let mut criteria: Vec<Criterion> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new(); // per criterion, per alternative

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match &alternatives {
            None => {
                let names: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                alternatives = Some(names);
            }
            Some(names) => {
                let name = fields.next().expect("non-empty line has a first field");
                let direction = match fields.next() {
                    Some("lower") => Direction::LowerIsBetter,
                    Some("higher") => Direction::HigherIsBetter,
                    Some(other) => {
                        return Err(MeasurementParseError::Syntax {
                            line: idx + 1,
                            message: format!("direction must be lower or higher, found {other:?}"),
                        })
                    }
                    None => {
                        return Err(MeasurementParseError::Syntax {
                            line: idx + 1,
                            message: "criterion row needs a direction".into(),
                        })
                    }
                };
                let values: Vec<f64> = fields
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| MeasurementParseError::Syntax {
                            line: idx + 1,
                            message: format!("invalid number {v:?}"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if values.len() != names.len() {
                    return Err(MeasurementParseError::Syntax {
                        line: idx + 1,
                        message: format!(
                            "expected {} values (one per alternative), found {}",
                            names.len(),
                            values.len()
                        ),
                    });
                }
                criteria.push(Criterion::new(name, direction));
                columns.push(values);
            }
        }
    }

    let alternatives = alternatives.ok_or(MeasurementParseError::Empty)?;
    if criteria.is_empty() {
        return Err(MeasurementParseError::Empty);
    }
    // Transpose criterion rows into per-alternative rows.
    let values: Vec<Vec<f64>> = (0..alternatives.len())
        .map(|a| columns.iter().map(|col| col[a]).collect())
        .collect();
    Ok(MeasurementTable::new(alternatives, criteria, values)?)
}

/// Renders the result as the percentage table: one total row, then one row
/// per criterion contribution, percentages to one decimal place.
pub fn render_result_table(result: &AhpResult) -> String {
    let name_width = result
        .criteria
        .iter()
        .map(|c| c.len())
        .chain(["Total".len()])
        .max()
        .unwrap_or(8)
        .max(8);
    let col_width = result
        .alternatives
        .iter()
        .map(|a| a.len())
        .max()
        .unwrap_or(6)
        .max(7)
        + 2;

    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}  {:>col_width$}", "", "Weight"));
    for alt in &result.alternatives {
        out.push_str(&format!("{alt:>col_width$}"));
    }
    out.push('\n');

    out.push_str(&format!(
        "{:<name_width$}  {:>col_width$}",
        "Total", "100.0%"
    ));
    for &total in &result.totals {
        out.push_str(&format!("{:>col_width$}", format!("{:.1}%", total * 100.0)));
    }
    out.push('\n');

    for (c, criterion) in result.criteria.iter().enumerate() {
        let weight = result.criterion_weights.weights()[c];
        out.push_str(&format!(
            "{criterion:<name_width$}  {:>col_width$}",
            format!("{:.1}%", weight * 100.0)
        ));
        for &contribution in &result.contributions[c] {
            out.push_str(&format!(
                "{:>col_width$}",
                format!("{:.1}%", contribution * 100.0)
            ));
        }
        out.push('\n');
    }
    out.push_str(&format!("\nRanking: {}\n", result.ranking.join(" > ")));
    out
}

/// The six criterion rows a bench report contributes for one alternative,
/// in measurement-file units (ms, req/s, ms, KB/s, bytes, s).
pub fn bench_criterion_rows(
    report: &cvparse_core::benchstat::BenchReport,
) -> Vec<(&'static str, Direction, f64)> {
    vec![
        (
            "time_per_concurrent_request",
            Direction::LowerIsBetter,
            report.time_per_concurrent_request_ms,
        ),
        (
            "requests_per_second",
            Direction::HigherIsBetter,
            report.requests_per_second,
        ),
        (
            "time_per_request",
            Direction::LowerIsBetter,
            report.time_per_request_ms,
        ),
        (
            "transfer_rate",
            Direction::HigherIsBetter,
            report.transfer_rate_bytes_per_s / 1024.0,
        ),
        (
            "total_transferred",
            Direction::HigherIsBetter,
            report.total_transferred as f64,
        ),
        (
            "time_taken_for_tests",
            Direction::LowerIsBetter,
            report.time_taken_for_tests_s,
        ),
    ]
}
