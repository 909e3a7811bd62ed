//! HTTP/JSON service for the favor-exchange platform.
//!
//! All state lives in one [`f1_core::Platform`] behind a lock. Every write
//! is persisted before its response goes out, and a background task
//! expires requests, closes rating windows and prunes sessions.

pub mod auth;
pub mod clock;
pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::time::Duration;

use tokio::net::TcpListener;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::ServerConfig;
pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, StartError};

pub struct Server {
    listener: TcpListener,
    state: AppState,
    sweep_interval: Duration,
}

impl Server {
    /// Opens the store and binds the listener. Fails on bad config, a
    /// corrupt store or a busy port.
    pub async fn bind(config: &ServerConfig) -> Result<Self, StartError> {
        let state = AppState::open(config)?;
        Self::bind_with(config, state).await
    }

    pub async fn bind_with(config: &ServerConfig, state: AppState) -> Result<Self, StartError> {
        let listener = TcpListener::bind(config.listen)
            .await
            .map_err(|source| StartError::Bind { addr: config.listen.to_string(), source })?;
        Ok(Server { listener, state, sweep_interval: config.sweep_interval })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    /// Serves until `shutdown` resolves, then drains in-flight requests and
    /// flushes the store.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        let sweeper = tokio::spawn(sweep_loop(self.state.clone(), self.sweep_interval));
        let app = router(self.state.clone());
        let served = axum::serve(self.listener, app).with_graceful_shutdown(shutdown).await;
        sweeper.abort();
        let flushed = self.state.flush().map_err(std::io::Error::other);
        served.and(flushed)
    }
}

async fn sweep_loop(state: AppState, every: Duration) {
    let mut tick = tokio::time::interval(every);
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tick.tick().await;
        match state.write(|p, now| Ok(p.sweep(now))).await {
            Ok(report) if report != Default::default() => tracing::info!(?report, "sweep"),
            Ok(_) => {}
            Err(e) => tracing::warn!(error = %e, "sweep failed"),
        }
    }
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
