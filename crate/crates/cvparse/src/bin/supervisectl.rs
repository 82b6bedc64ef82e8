//! Control client for the supervisor daemon.

use std::path::PathBuf;

use clap::Parser;
use cvparse::supervisor::ctl::send_command;

#[derive(Parser)]
#[command(
    name = "supervisectl",
    about = "Control a running supervisor: status | start <name> | stop <name> | restart <name> | shutdown"
)]
struct Cli {
    /// Control socket of the supervisor daemon.
    #[arg(long)]
    socket: PathBuf,
    /// Command verb plus optional program name.
    #[arg(required = true)]
    command: Vec<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let response = send_command(&cli.socket, &cli.command.join(" ")).await?;
    print!("{response}");
    if response.starts_with("ERROR") {
        std::process::exit(1);
    }
    Ok(())
}
