//! The supervisor daemon.

use std::path::PathBuf;

use clap::Parser;
use cvparse::supervisor::{Supervisor, SupervisorConfig, SupervisorOptions};

#[derive(Parser)]
#[command(
    name = "supervise",
    about = "Start and supervise the service constellation"
)]
struct Cli {
    /// INI config with [program:name] sections.
    #[arg(short = 'c', long)]
    config: PathBuf,
    /// Control socket path (default: <config>.sock).
    #[arg(long)]
    socket: Option<PathBuf>,
    /// Append one JSON event per lifecycle transition to this file.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let text = std::fs::read_to_string(&cli.config)?;
    let config = SupervisorConfig::parse(&text)?;
    let socket = cli
        .socket
        .unwrap_or_else(|| PathBuf::from(format!("{}.sock", cli.config.display())));

    let supervisor = Supervisor::launch(
        config,
        SupervisorOptions {
            socket: Some(socket.clone()),
            event_log: cli.event_log,
        },
    )
    .await?;
    println!("control socket at {}", socket.display());

    match supervisor.start_all().await {
        Ok(()) => println!("all tiers running"),
        Err(e) => eprintln!("startup halted: {e}"),
    }
    supervisor.wait_for_shutdown().await;
    Ok(())
}
