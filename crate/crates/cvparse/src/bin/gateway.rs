//! The CV parse gateway service.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use cvparse::gateway::{bind, GatewayConfig};
use cvparse::segio::{load_lexicon, load_weights};
use cvparse_core::ner::SectionKind;
use cvparse_core::segmenter::{DenseClassifier, KeywordProvider};
use url::Url;

#[derive(Parser)]
#[command(name = "gateway", about = "Parse documents into structured sections")]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Predictor endpoint as kind=url; must be given for all five kinds.
    #[arg(long = "predictor", required = true)]
    predictors: Vec<String>,
    /// Remote text-extractor base URL (built-in plain text when omitted).
    #[arg(long)]
    extractor_url: Option<Url>,
    /// Remote embedder base URL (local keyword provider when omitted).
    #[arg(long)]
    embedder_url: Option<Url>,
    /// Keyword lexicon for the local provider.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Classifier weight file; the keyword-router head when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Per-service call timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    fanout_timeout: f64,
    /// Artificial sectioning-stage delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    sectioning_delay: f64,
    /// Maximum concurrently processed parses (0 = unlimited).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Append one JSON timing record per request to this file.
    #[arg(long)]
    timing_log: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();

    let mut predictors = BTreeMap::new();
    for entry in &cli.predictors {
        let (kind, url) = entry
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--predictor must be kind=url, got {entry:?}"))?;
        let kind = SectionKind::parse(kind)
            .ok_or_else(|| anyhow::anyhow!("unknown section kind {kind:?}"))?;
        predictors.insert(kind, Url::parse(url)?);
    }

    let mut config = GatewayConfig::new(cli.listen, predictors);
    config.extractor_url = cli.extractor_url;
    config.embedder_url = cli.embedder_url;
    if let Some(path) = &cli.lexicon {
        config.provider = Arc::new(load_lexicon(path)?);
    } else {
        config.provider = Arc::new(KeywordProvider::builtin());
    }
    config.classifier = match &cli.weights {
        Some(path) => Arc::new(load_weights(path)?),
        None => Arc::new(DenseClassifier::keyword_router()),
    };
    config.fanout_timeout = Duration::from_secs_f64(cli.fanout_timeout);
    config.sectioning_delay = Duration::from_secs_f64(cli.sectioning_delay);
    config.workers = cli.workers;
    config.timing_log = cli.timing_log;

    let running = bind(config).await?;
    log::info!("gateway listening on {}", running.addr);
    println!("listening on {}", running.addr);
    running.join().await;
    Ok(())
}
