//! Media service: speech synthesis, audio assets and product images.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use livehost_core::media::{MediaError, StubSynthesizer, SynthesisResult, AUDIO_CONTENT_TYPE};
use livehost_core::Synthesizer;

use crate::wire::{ErrorBody, Health, SynthesizeRequest};

pub struct MediaState {
    pub synthesizer: Arc<StubSynthesizer>,
    pub image_dir: Option<PathBuf>,
}

pub fn router(state: Arc<MediaState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/synthesize", post(synthesize))
        .route("/v1/assets/{asset_id}", get(asset))
        .route("/v1/products/{routing_id}/image", get(image))
        .with_state(state)
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: code.into(),
            message: message.into(),
        }),
    )
        .into_response()
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        service: "media".into(),
    })
}

async fn synthesize(
    State(state): State<Arc<MediaState>>,
    Json(req): Json<SynthesizeRequest>,
) -> Result<Json<SynthesisResult>, Response> {
    state.synthesizer.synthesize(&req.text).map(Json).map_err(|e| match e {
        MediaError::EmptyText => error(StatusCode::BAD_REQUEST, "empty_text", e.to_string()),
        other => error(StatusCode::SERVICE_UNAVAILABLE, "unavailable", other.to_string()),
    })
}

async fn asset(State(state): State<Arc<MediaState>>, Path(asset_id): Path<String>) -> Response {
    match state.synthesizer.fetch(&asset_id) {
        Ok(bytes) => ([(header::CONTENT_TYPE, AUDIO_CONTENT_TYPE)], bytes).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, "not_found", e.to_string()),
    }
}

pub const PLACEHOLDER_IMAGE: &str = concat!(
    r##"<svg xmlns="http://www.w3.org/2000/svg" width="320" height="320" viewBox="0 0 320 320">"##,
    r##"<rect width="320" height="320" fill="#f4ece6"/>"##,
    r##"<rect x="120" y="70" width="80" height="180" rx="18" fill="#d9c2b3"/>"##,
    r##"<rect x="135" y="45" width="50" height="30" rx="6" fill="#b89a88"/>"##,
    "</svg>"
);

async fn image(State(state): State<Arc<MediaState>>, Path(routing_id): Path<String>) -> Response {
    let Ok(id) = routing_id.parse::<u64>() else {
        return error(StatusCode::NOT_FOUND, "not_found", "routing id must be numeric");
    };
    if let Some(dir) = &state.image_dir {
        for (ext, mime) in [("png", "image/png"), ("jpg", "image/jpeg"), ("svg", "image/svg+xml")] {
            let path = dir.join(format!("{id}.{ext}"));
            if let Ok(bytes) = tokio::fs::read(&path).await {
                return ([(header::CONTENT_TYPE, mime)], bytes).into_response();
            }
        }
    }
    ([(header::CONTENT_TYPE, "image/svg+xml")], PLACEHOLDER_IMAGE).into_response()
}
