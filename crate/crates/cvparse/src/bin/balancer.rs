//! The upstream reverse proxy.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use cvparse::balancer::{bind, BalancerConfig, DEFAULT_ATTEMPT_TIMEOUT};
use cvparse_core::upstream::parse_config;

#[derive(Parser)]
#[command(name = "balancer", about = "Round-robin upstream proxy with failover")]
struct Cli {
    /// Config file: upstream block(s) plus a proxied server block.
    #[arg(short = 'c', long)]
    config: PathBuf,
    /// Override the listen address from the config file.
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Per-attempt timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_ATTEMPT_TIMEOUT.as_secs_f64())]
    attempt_timeout: f64,
    /// Append one access-log line per proxied request to this file.
    #[arg(long)]
    access_log: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let text = std::fs::read_to_string(&cli.config)?;
    let parsed = parse_config(&text)?;

    let listener = parsed
        .listeners
        .first()
        .ok_or_else(|| anyhow::anyhow!("config has no server block"))?;
    let upstream = parsed
        .upstreams
        .iter()
        .find(|u| u.name == listener.proxy_pass)
        .ok_or_else(|| {
            anyhow::anyhow!(
                "proxy_pass {:?} does not match any upstream",
                listener.proxy_pass
            )
        })?
        .clone();

    let listen: SocketAddr = match cli.listen {
        Some(addr) => addr,
        None => {
            let port: u16 = listener.listen.parse().map_err(|_| {
                anyhow::anyhow!(
                    "listen {:?} is not a port number; pass --listen to override",
                    listener.listen
                )
            })?;
            SocketAddr::from(([127, 0, 0, 1], port))
        }
    };

    let running = bind(BalancerConfig {
        listen,
        upstream,
        attempt_timeout: Duration::from_secs_f64(cli.attempt_timeout),
        access_log: cli.access_log,
    })
    .await?;
    log::info!("balancer listening on {}", running.addr);
    println!("listening on {}", running.addr);
    running.join().await;
    Ok(())
}
