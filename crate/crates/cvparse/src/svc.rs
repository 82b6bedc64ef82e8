//! Shared plumbing for the HTTP services.

use std::net::SocketAddr;

use axum::Router;
use tokio::task::JoinHandle;

/// A bound service: the actual listen address (useful with port 0) and the
/// serving task.
pub struct RunningService {
    pub addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl RunningService {
    pub fn abort(&self) {
        self.handle.abort();
    }

    /// Runs until the server task stops (normally never).
    pub async fn join(self) {
        let _ = self.handle.await;
    }
}

/// Binds `listen` and serves the router in a background task.
pub async fn serve_app(listen: SocketAddr, app: Router) -> std::io::Result<RunningService> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server on {addr} stopped: {e}");
        }
    });
    Ok(RunningService { addr, handle })
}
