//! A section prediction service instance.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use cvparse::latency::LatencyModel;
use cvparse::predictor::{startup, ExtractionMode, PredictorConfig};
use cvparse_core::ner::SectionKind;

#[derive(Parser)]
#[command(name = "predictor", about = "Serve predictions for one CV section")]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Section kind: personal_information, education, work_experience,
    /// skills or functional_area.
    #[arg(long)]
    kind: String,
    /// Model store root; required for stub extraction.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Model artifact id to load at startup.
    #[arg(long)]
    model_id: Option<String>,
    /// Latency model: none, fixed:<s> or lognormal:<mu>,<sigma>.
    #[arg(long, default_value = "none")]
    latency: String,
    #[arg(long, default_value_t = 0)]
    latency_seed: u64,
    /// Extraction mode: stub (pattern rules) or none (latency only).
    #[arg(long, default_value = "stub")]
    extraction: String,
    /// Artificial model-load delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    load_delay: f64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let kind = SectionKind::parse(&cli.kind)
        .ok_or_else(|| anyhow::anyhow!("unknown section kind {:?}", cli.kind))?;
    let mut config = PredictorConfig::new(cli.listen, kind);
    config.store_root = cli.store;
    config.model_id = cli.model_id;
    config.latency = LatencyModel::parse(&cli.latency).map_err(|e| anyhow::anyhow!(e))?;
    config.latency_seed = cli.latency_seed;
    config.extraction = ExtractionMode::parse(&cli.extraction)
        .ok_or_else(|| anyhow::anyhow!("extraction must be stub or none"))?;
    config.load_delay = Duration::from_secs_f64(cli.load_delay);

    let running = startup(config).await?;
    log::info!("{kind} predictor listening on {}", running.addr);
    println!("listening on {}", running.addr);
    running.join().await;
    Ok(())
}
