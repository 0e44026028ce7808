//! HTTP service, simulation harness and export for the teaching-staff
//! evaluation store.

pub mod api;
pub mod auth;
pub mod error;
pub mod export;
pub mod simulate;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use evaluare_core::{QuestionBank, Store, StoreError};
use tokio::net::TcpListener;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Take the client address from `X-Forwarded-For` instead of the TCP peer.
    pub trusted_proxy: bool,
    /// Directory of a built UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    /// How often abandoned sessions are swept.
    pub sweep_interval: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { trusted_proxy: false, static_dir: None, sweep_interval: Duration::from_secs(60) }
    }
}

/// Everything a request handler needs.
pub struct AppCore {
    pub store: Store,
    pub bank: QuestionBank,
    pub config: ServerConfig,
}

impl AppCore {
    /// Registers the bank and finishes any questionnaire that was fully
    /// answered when the previous process stopped.
    pub fn new(store: Store, bank: QuestionBank, config: ServerConfig) -> Result<Self, StoreError> {
        store.register_bank(&bank)?;
        let recovered = store.recover(Utc::now())?;
        if recovered > 0 {
            tracing::info!(recovered, "finalized interrupted questionnaires");
        }
        Ok(AppCore { store, bank, config })
    }
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, core: Arc<AppCore>, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let sweeper = tokio::spawn(sweep_stale(core.clone()));
    let app = api::router(core);
    let result = axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await;
    sweeper.abort();
    // Wait for the sweeper to drop its handle so the store can be reopened.
    let _ = sweeper.await;
    result
}

async fn sweep_stale(core: Arc<AppCore>) {
    let mut tick = tokio::time::interval(core.config.sweep_interval);
    loop {
        tick.tick().await;
        match core.store.abort_stale(Utc::now()) {
            Ok(0) => {}
            Ok(n) => tracing::info!(aborted = n, "swept stale sessions"),
            Err(e) => tracing::warn!(error = %e, "stale-session sweep failed"),
        }
    }
}

/// A server running on a background task, for tests and the simulator.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub async fn start(core: Arc<AppCore>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel();
        let handle = tokio::spawn(serve(listener, core, async {
            let _ = rx.await;
        }));
        Ok(RunningServer { addr, shutdown: Some(tx), handle })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.handle).await {
            Ok(r) => r,
            Err(e) => Err(std::io::Error::other(e)),
        }
    }
}
