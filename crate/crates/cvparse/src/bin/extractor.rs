//! The text extraction service.

use std::net::SocketAddr;
use std::time::Duration;

use clap::Parser;
use cvparse::extractor::{bind, ExtractorConfig};

#[derive(Parser)]
#[command(name = "extractor", about = "Extract plain text from posted documents")]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Artificial extraction delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let running = bind(ExtractorConfig {
        listen: cli.listen,
        delay: Duration::from_secs_f64(cli.delay),
    })
    .await?;
    log::info!("extractor listening on {}", running.addr);
    println!("listening on {}", running.addr);
    running.join().await;
    Ok(())
}
