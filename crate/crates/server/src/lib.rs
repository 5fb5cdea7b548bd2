//! The two deployable services: the dialogue gateway (sessions, comments,
//! event stream, catalogue) and the media service (synthesis and assets).

pub mod actor;
pub mod config;
pub mod gateway;
pub mod hub;
pub mod media;
pub mod remote;
pub mod wire;

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::Router;
use livehost_core::media::StubSynthesizer;
use livehost_core::{
    load_catalogue, Catalogue, DialogueConfig, GenerationBackend, Pipeline, StubBackend, Synthesizer,
};
use thiserror::Error;
use tokio::sync::oneshot;

pub use config::ServiceConfig;
pub use gateway::Gateway;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("catalogue: {0}")]
    Catalogue(String),
    #[error("dialogue config: {0}")]
    Dialogue(String),
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn read(path: &std::path::Path) -> Result<String, ServiceError> {
    std::fs::read_to_string(path).map_err(ServiceError::Io)
}

pub fn load_data(cfg: &ServiceConfig) -> Result<(Catalogue, DialogueConfig), ServiceError> {
    let catalogue = match &cfg.data.catalogue {
        Some(p) => load_catalogue(read(p)?.as_bytes()).map_err(|e| ServiceError::Catalogue(e.to_string()))?,
        None => Catalogue::bundled(),
    };
    let mut dialogue = match &cfg.data.dialogue {
        Some(p) => DialogueConfig::from_toml(&read(p)?).map_err(|e| ServiceError::Dialogue(e.to_string()))?,
        None => DialogueConfig::bundled(),
    };
    if let Some(w) = cfg.weights {
        dialogue.weights = w;
    }
    dialogue.validate().map_err(|e| ServiceError::Dialogue(e.to_string()))?;
    Ok((catalogue, dialogue))
}

/// Builds the gateway described by `cfg`: remote backend and media service
/// when endpoints are set, in-process stubs otherwise. Construct it outside
/// any async runtime; the HTTP clients are blocking.
pub fn gateway_from_config(cfg: &ServiceConfig) -> Result<Gateway, ServiceError> {
    let (catalogue, dialogue) = load_data(cfg)?;
    let catalogue = Arc::new(catalogue);
    let timeout = Duration::from_millis(cfg.backend.timeout_ms);
    let backend: Arc<dyn GenerationBackend> = match &cfg.backend.endpoint {
        Some(url) => Arc::new(remote::RemoteBackend::new(url.clone(), timeout)?),
        None => Arc::new(
            StubBackend::new(catalogue.clone()).with_stock_openings(dialogue.rerank.stock_openings.clone()),
        ),
    };
    let synthesizer: Arc<dyn Synthesizer> = match &cfg.media.endpoint {
        Some(url) => Arc::new(remote::HttpSynthesizer::new(url, timeout)?),
        None => Arc::new(StubSynthesizer::new(cfg.session.speaking_rate)),
    };
    let pipeline = Arc::new(Pipeline::new(catalogue.clone(), dialogue, backend));
    Ok(Gateway::new(catalogue, pipeline, synthesizer, cfg.session.clone())
        .with_seed(cfg.gateway.seed)
        .with_event_log_dir(cfg.gateway.event_log_dir.clone()))
}

pub fn media_state_from_config(cfg: &ServiceConfig) -> media::MediaState {
    media::MediaState {
        synthesizer: Arc::new(StubSynthesizer::new(cfg.session.speaking_rate)),
        image_dir: cfg.media.image_dir.clone(),
    }
}

/// Serves `router` until ctrl-c.
pub async fn serve(addr: SocketAddr, router: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server running on its own thread and runtime.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl BackgroundServer {
    /// Binds `addr` (port 0 picks a free port) and serves `router`.
    pub fn start(addr: SocketAddr, router: Router) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, router)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
            runtime.shutdown_timeout(Duration::from_secs(1));
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
