//! Offline analysis of gateway timing logs and bench runs.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cvparse::bench::BenchRunFile;
use cvparse::reportio::{
    plot_data_json, read_log, render_comparison, render_percentile_csv, render_percentile_table,
    render_stage_csv, render_stage_table,
};
use cvparse_core::stats::{compare_modes, percentile_table, stage_stats};

#[derive(Parser)]
#[command(name = "report", about = "Statistics over timing logs and bench runs")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Per-stage summary statistics of one timing log.
    Stages {
        log: PathBuf,
        /// Emit CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
        /// Emit boxplot five-number summaries as JSON.
        #[arg(long)]
        plot_data: bool,
    },
    /// Compare parallel and sequential timing logs over the same corpus.
    Compare {
        parallel_log: PathBuf,
        sequential_log: PathBuf,
        /// Emit the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Response-time percentiles per concurrency from bench JSON files.
    Percentiles {
        #[arg(required = true)]
        bench_files: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Commands::Stages {
            log,
            csv,
            plot_data,
        } => {
            let records = read_log(&log)?;
            let stats = stage_stats(&records)?;
            if plot_data {
                println!("{}", serde_json::to_string_pretty(&plot_data_json(&stats))?);
            } else if csv {
                print!("{}", render_stage_csv(&stats));
            } else {
                print!("{}", render_stage_table(&stats));
            }
        }
        Commands::Compare {
            parallel_log,
            sequential_log,
            json,
        } => {
            let parallel = read_log(&parallel_log)?;
            let sequential = read_log(&sequential_log)?;
            let summary = compare_modes(&parallel, &sequential)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", render_comparison(&summary));
            }
        }
        Commands::Percentiles { bench_files, csv } => {
            let mut inputs = Vec::new();
            for path in &bench_files {
                let run: BenchRunFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                inputs.push((run.concurrency, run.latencies_s));
            }
            inputs.sort_by_key(|(c, _)| *c);
            let rows = percentile_table(&inputs)?;
            if csv {
                print!("{}", render_percentile_csv(&rows));
            } else {
                print!("{}", render_percentile_table(&rows));
            }
        }
    }
    Ok(())
}
