//! Framework selection over benchmark measurements.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cvparse::ahpio::{parse_measurement_file, render_result_table};
use cvparse_core::ahp::{build_pairwise_matrix, consistency_ratio, evaluate};

#[derive(Parser)]
#[command(
    name = "ahp",
    about = "Rank alternatives with the analytic hierarchy process"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Evaluate a measurement table and rank the alternatives.
    Evaluate {
        /// Measurement file: first line alternative names, then one
        /// `name direction values...` row per criterion.
        #[arg(long)]
        input: PathBuf,
        /// Write the machine-readable result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress the human-readable table.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Commands::Evaluate { input, out, quiet } => {
            let text = std::fs::read_to_string(&input)?;
            let table = parse_measurement_file(&text)?;
            let criteria = table.criteria().to_vec();
            let result = evaluate(&table, &criteria)?;
            if !quiet {
                print!("{}", render_result_table(&result));
                // Consistency ratios are diagnostics only; ratio matrices
                // from measurements are consistent unless clamping engaged.
                for criterion in &criteria {
                    let values = table
                        .column(&criterion.name)
                        .expect("criterion came from table");
                    if values.len() >= 2 {
                        let matrix = build_pairwise_matrix(&values, criterion.direction)?;
                        let cr = consistency_ratio(&matrix)?;
                        if cr > 0.1 {
                            eprintln!("warning: {} has consistency ratio {cr:.3}", criterion.name);
                        }
                    }
                }
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&result)?)?;
            }
            Ok(())
        }
    }
}
