//! The sentence embedding service.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use cvparse::embedder::{bind, EmbedderConfig};
use cvparse::segio::{load_lexicon, ReplayProvider};
use cvparse_core::segmenter::{EmbeddingProvider, KeywordProvider};

#[derive(Parser)]
#[command(name = "embedder", about = "Serve sentence embeddings")]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Keyword lexicon file (bundled lexicon when omitted).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Replay embeddings from a JSONL file instead of the keyword provider.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Artificial embedding delay per batch, in seconds.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let provider: Arc<dyn EmbeddingProvider + Send + Sync> = match (&cli.replay, &cli.lexicon) {
        (Some(path), _) => Arc::new(ReplayProvider::load(path)?),
        (None, Some(path)) => Arc::new(load_lexicon(path)?),
        (None, None) => Arc::new(KeywordProvider::builtin()),
    };
    let running = bind(EmbedderConfig {
        listen: cli.listen,
        provider,
        delay: Duration::from_secs_f64(cli.delay),
    })
    .await?;
    log::info!("embedder listening on {}", running.addr);
    println!("listening on {}", running.addr);
    running.join().await;
    Ok(())
}
