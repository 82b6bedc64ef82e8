//! HTTP load benchmark in the classic ab style.

use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use cvparse::ahpio::bench_criterion_rows;
use cvparse::bench::{run_bench, BenchConfig, BenchRunFile, Method};
use cvparse_core::ahp::Direction;
use url::Url;

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Benchmark an HTTP endpoint: N requests at concurrency C"
)]
struct Cli {
    /// Number of requests to perform.
    #[arg(short = 'n', default_value_t = 1)]
    requests: u64,
    /// Number of requests in flight at once.
    #[arg(short = 'c', default_value_t = 1)]
    concurrency: u32,
    /// POST the contents of this file as the request body.
    #[arg(short = 'p')]
    post_file: Option<PathBuf>,
    /// Content-Type for the POST body.
    #[arg(short = 'T', default_value = "text/plain")]
    content_type: String,
    /// Extra header, `Name: value`; repeatable.
    #[arg(short = 'H')]
    headers: Vec<String>,
    /// Reuse connections (keep-alive) instead of one connection per request.
    #[arg(short = 'k', long)]
    keep_alive: bool,
    /// Per-request timeout in seconds.
    #[arg(short = 't', default_value_t = 30.0)]
    timeout: f64,
    /// Write the full run (report + latencies) as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Emit the six criterion rows for one measurement-table column.
    #[arg(long)]
    ahp_row: bool,
    url: Url,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();

    let mut config = BenchConfig::new(cli.url.clone(), cli.requests, cli.concurrency);
    config.keep_alive = cli.keep_alive;
    config.per_request_timeout = Duration::from_secs_f64(cli.timeout);
    if let Some(path) = &cli.post_file {
        config.method = Method::Post;
        config.body = Some(std::fs::read(path)?);
        config
            .headers
            .push(("Content-Type".into(), cli.content_type.clone()));
    }
    for header in &cli.headers {
        let (name, value) = header
            .split_once(':')
            .ok_or_else(|| anyhow::anyhow!("header must be 'Name: value', got {header:?}"))?;
        config
            .headers
            .push((name.trim().to_string(), value.trim().to_string()));
    }

    let outcome = run_bench(&config).await?;
    let report = &outcome.report;

    if cli.ahp_row {
        if !report.ahp_eligible() {
            anyhow::bail!(
                "{} requests failed; a run with failures is not usable for selection",
                report.failed_requests
            );
        }
        for (name, direction, value) in bench_criterion_rows(report) {
            let direction = match direction {
                Direction::LowerIsBetter => "lower",
                Direction::HigherIsBetter => "higher",
            };
            println!("{name} {direction} {value:.6}");
        }
    } else {
        println!("Benchmarking {}", cli.url);
        println!();
        println!("Concurrency Level:      {}", report.concurrency);
        println!(
            "Time taken for tests:   {:.3} seconds",
            report.time_taken_for_tests_s
        );
        println!("Complete requests:      {}", report.n_requests);
        println!("Failed requests:        {}", report.failed_requests);
        println!("Total transferred:      {} bytes", report.total_transferred);
        println!(
            "Requests per second:    {:.2} [#/sec] (mean)",
            report.requests_per_second
        );
        println!(
            "Time per request:       {:.3} [ms] (mean latency)",
            report.time_per_request_ms
        );
        println!(
            "Time per concurrent request: {:.3} [ms] (wall * C / N)",
            report.time_per_concurrent_request_ms
        );
        println!(
            "Transfer rate:          {:.2} [Kbytes/sec] received",
            report.transfer_rate_bytes_per_s / 1024.0
        );
    }

    if let Some(path) = cli.json {
        let run = BenchRunFile {
            url: cli.url.to_string(),
            concurrency: cli.concurrency,
            report: report.clone(),
            latencies_s: outcome.latencies_s,
        };
        std::fs::write(&path, serde_json::to_string(&run)?)?;
    }
    Ok(())
}
