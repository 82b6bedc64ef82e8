//! Scriptable stub service for supervision and load experiments: serves a
//! health endpoint, optionally records its start time, and can crash or
//! exit on a schedule.

use std::net::SocketAddr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use clap::Parser;

#[derive(Parser)]
#[command(name = "stubsvc", about = "Configurable stub service for experiments")]
struct Cli {
    /// Serve /health (and / ) on this address; omit to run headless.
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Name written to the start log.
    #[arg(long, default_value = "stub")]
    name: String,
    /// Append "<name> <unix-nanos>" here at startup.
    #[arg(long)]
    start_log: Option<std::path::PathBuf>,
    /// Exit with code 1 after this many milliseconds.
    #[arg(long)]
    crash_after_ms: Option<u64>,
    /// Exit cleanly (code 0) after this many milliseconds.
    #[arg(long)]
    exit_after_ms: Option<u64>,
    /// Serve 503 on /health forever.
    #[arg(long)]
    never_ready: bool,
    /// Delay every non-health response by this many milliseconds.
    #[arg(long, default_value_t = 0)]
    handle_delay_ms: u64,
}

async fn ok_handler() -> &'static str {
    "ok"
}

async fn unready_handler() -> impl IntoResponse {
    (StatusCode::SERVICE_UNAVAILABLE, "not ready")
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    if let Some(path) = &cli.start_log {
        use std::io::Write;
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH)?.as_nanos();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        writeln!(file, "{} {nanos}", cli.name)?;
    }

    if let Some(listen) = cli.listen {
        let delay = Duration::from_millis(cli.handle_delay_ms);
        let root = get(move || async move {
            if delay > Duration::ZERO {
                tokio::time::sleep(delay).await;
            }
            "stub"
        });
        let health = if cli.never_ready {
            get(unready_handler)
        } else {
            get(ok_handler)
        };
        let app = Router::new().route("/health", health).route("/", root);
        let listener = tokio::net::TcpListener::bind(listen).await?;
        tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
    }

    match (cli.crash_after_ms, cli.exit_after_ms) {
        (Some(ms), _) => {
            tokio::time::sleep(Duration::from_millis(ms)).await;
            std::process::exit(1);
        }
        (None, Some(ms)) => {
            tokio::time::sleep(Duration::from_millis(ms)).await;
            std::process::exit(0);
        }
        (None, None) => futures::future::pending::<()>().await,
    }
    Ok(())
}
