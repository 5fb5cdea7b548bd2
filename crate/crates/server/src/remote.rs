//! HTTP clients for a remote generation backend and a remote media service,
//! and a router exposing any backend over the same wire schema.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use livehost_core::dialogue::backend::{BackendError, BackendRequest, BackendResponse};
use livehost_core::media::{MediaError, SynthesisResult};
use livehost_core::{GenerationBackend, Synthesizer};
use reqwest::blocking::Client;

use crate::wire::{ErrorBody, SynthesizeRequest};

/// Posts [`BackendRequest`] as JSON to `endpoint` and expects a
/// [`BackendResponse`]. Sampling parameters pass through untouched.
pub struct RemoteBackend {
    client: Client,
    endpoint: String,
    timeout: Duration,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, reqwest::Error> {
        Ok(Self {
            client: Client::builder().timeout(timeout).build()?,
            endpoint: endpoint.into(),
            timeout,
        })
    }
}

impl GenerationBackend for RemoteBackend {
    fn generate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        let started = Instant::now();
        let failure = |message: String| BackendError::Failure {
            message,
            partial: Vec::new(),
        };
        let resp = self.client.post(&self.endpoint).json(req).send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout {
                    elapsed_ms: started.elapsed().as_millis() as u64,
                    partial: Vec::new(),
                }
            } else {
                failure(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(failure(format!("{status}: {body}")));
        }
        let body: BackendResponse = resp.json().map_err(|e| failure(format!("bad body: {e}")))?;
        if started.elapsed() > self.timeout {
            return Err(BackendError::Timeout {
                elapsed_ms: started.elapsed().as_millis() as u64,
                partial: body.candidates,
            });
        }
        Ok(body.candidates)
    }
}

/// Synthesizer backed by a running media service.
pub struct HttpSynthesizer {
    client: Client,
    base: String,
}

impl HttpSynthesizer {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, reqwest::Error> {
        Ok(Self {
            client: Client::builder().timeout(timeout).build()?,
            base: base_url.trim_end_matches('/').to_string(),
        })
    }

    pub fn fetch(&self, asset_id: &str) -> Result<Vec<u8>, MediaError> {
        let resp = self
            .client
            .get(format!("{}/v1/assets/{asset_id}", self.base))
            .send()
            .map_err(|e| MediaError::Unavailable(e.to_string()))?;
        match resp.status() {
            StatusCode::NOT_FOUND => Err(MediaError::UnknownAsset(asset_id.to_string())),
            s if s.is_success() => resp
                .bytes()
                .map(|b| b.to_vec())
                .map_err(|e| MediaError::Unavailable(e.to_string())),
            s => Err(MediaError::Unavailable(s.to_string())),
        }
    }
}

impl Synthesizer for HttpSynthesizer {
    fn synthesize(&self, text: &str) -> Result<SynthesisResult, MediaError> {
        let resp = self
            .client
            .post(format!("{}/v1/synthesize", self.base))
            .json(&SynthesizeRequest { text: text.to_string() })
            .send()
            .map_err(|e| MediaError::Unavailable(e.to_string()))?;
        match resp.status() {
            s if s.is_success() => resp
                .json()
                .map_err(|e| MediaError::Unavailable(format!("bad body: {e}"))),
            StatusCode::BAD_REQUEST => Err(MediaError::EmptyText),
            s => Err(MediaError::Unavailable(s.to_string())),
        }
    }
}

/// `POST /v1/generate` served by `backend`.
pub fn backend_router(backend: Arc<dyn GenerationBackend>) -> Router {
    Router::new()
        .route("/v1/generate", post(generate))
        .with_state(backend)
}

async fn generate(
    State(backend): State<Arc<dyn GenerationBackend>>,
    Json(req): Json<BackendRequest>,
) -> Result<Json<BackendResponse>, (StatusCode, Json<ErrorBody>)> {
    let out = tokio::task::spawn_blocking(move || backend.generate(&req))
        .await
        .map_err(|e| {
            (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(ErrorBody {
                    error: "internal".into(),
                    message: e.to_string(),
                }),
            )
        })?;
    match out {
        Ok(candidates) => Ok(Json(BackendResponse { candidates })),
        Err(e) => Err((
            StatusCode::BAD_GATEWAY,
            Json(ErrorBody {
                error: "backend".into(),
                message: e.to_string(),
            }),
        )),
    }
}
