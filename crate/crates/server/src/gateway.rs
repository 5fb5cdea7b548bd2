//! Dialogue gateway: session lifecycle, comments, ablation switches, the
//! server-sent event stream and the product catalogue.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use livehost_core::catalogue::RoutingId;
use livehost_core::dialogue::{AblationFlags, CommentError};
use livehost_core::{Catalogue, Pipeline, Session, SessionConfig, SessionRunner, Synthesizer};
use serde::Deserialize;
use tokio::sync::oneshot;

use crate::actor::{Command, SessionHandle};
use crate::hub::EventHub;
use crate::wire::{
    image_path, AblationAck, ApiEvent, CommentAck, CreateSessionRequest, CreateSessionResponse,
    ErrorBody, Health, PostCommentRequest, ProductDetail, ProductSummary, SessionStatus,
};

pub struct Gateway {
    catalogue: Arc<Catalogue>,
    pipeline: Arc<Pipeline>,
    synthesizer: Arc<dyn Synthesizer>,
    defaults: SessionConfig,
    seed: u64,
    event_log_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown session {id}"))
    }

    fn session_gone() -> Self {
        Self::new(StatusCode::GONE, "session_stopped", "session loop has stopped")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.code.into(),
                message: self.message,
            }),
        )
            .into_response()
    }
}

impl Gateway {
    pub fn new(
        catalogue: Arc<Catalogue>,
        pipeline: Arc<Pipeline>,
        synthesizer: Arc<dyn Synthesizer>,
        defaults: SessionConfig,
    ) -> Self {
        Self {
            catalogue,
            pipeline,
            synthesizer,
            defaults,
            seed: 0,
            event_log_dir: None,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_event_log_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.event_log_dir = dir;
        self
    }

    pub fn catalogue(&self) -> &Arc<Catalogue> {
        &self.catalogue
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions.read().expect("session table poisoned").get(id).cloned()
    }

    /// Starts a session loop. `overrides` is laid over the default config.
    pub fn create_session(
        &self,
        overrides: Option<serde_json::Map<String, serde_json::Value>>,
        seed: Option<u64>,
    ) -> Result<CreateSessionResponse, ApiError> {
        let invalid = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", m);
        let config = match overrides {
            None => self.defaults.clone(),
            Some(map) => {
                let mut base = serde_json::to_value(&self.defaults).expect("config serializes");
                base.as_object_mut()
                    .expect("config is an object")
                    .extend(map);
                serde_json::from_value(base).map_err(|e| invalid(e.to_string()))?
            }
        };
        let n = self.next_id.fetch_add(1, Ordering::SeqCst);
        let id = format!("s{n:06}");
        let epoch = Instant::now();
        let (session, events) =
            Session::start(config, self.catalogue.clone(), self.synthesizer.clone(), 0)
                .map_err(|e| invalid(e.to_string()))?;
        let stage = session.stage();
        let log = match &self.event_log_dir {
            Some(dir) => {
                let open = std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::File::create(dir.join(format!("{id}.jsonl"))));
                match open {
                    Ok(f) => Some(f),
                    Err(e) => {
                        tracing::warn!(session = %id, "event log disabled: {e}");
                        None
                    }
                }
            }
            None => None,
        };
        let hub = Arc::new(EventHub::new(id.clone(), log));
        hub.publish(events);
        let seed = seed.unwrap_or(self.seed ^ n.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let runner = SessionRunner::new(session, self.pipeline.clone(), seed)
            .with_clock(Box::new(move || epoch.elapsed().as_millis() as u64));
        let handle = Arc::new(SessionHandle::spawn(id.clone(), runner, hub, epoch));
        self.sessions
            .write()
            .expect("session table poisoned")
            .insert(id.clone(), handle);
        tracing::info!(session = %id, "session created");
        Ok(CreateSessionResponse {
            session_id: id,
            stage,
        })
    }

    pub async fn post_comment(&self, id: &str, text: String, author: String) -> Result<CommentAck, ApiError> {
        let handle = self.session(id).ok_or_else(|| ApiError::unknown_session(id))?;
        if text.trim().is_empty() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "comment text is empty"));
        }
        let (tx, rx) = oneshot::channel();
        if !handle.send(Command::Comment { text, author, reply: tx }) {
            return Err(ApiError::session_gone());
        }
        match rx.await {
            Ok(Ok(comment_id)) => Ok(CommentAck { comment_id }),
            Ok(Err(CommentError::EmptyText)) => Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "empty_text",
                "comment text is empty",
            )),
            Err(_) => Err(ApiError::session_gone()),
        }
    }

    pub async fn set_ablation(&self, id: &str, flags: AblationFlags) -> Result<AblationAck, ApiError> {
        let handle = self.session(id).ok_or_else(|| ApiError::unknown_session(id))?;
        let (tx, rx) = oneshot::channel();
        if !handle.send(Command::SetAblation { flags, reply: tx }) {
            return Err(ApiError::session_gone());
        }
        rx.await
            .map(|ablation| AblationAck { ablation })
            .map_err(|_| ApiError::session_gone())
    }

    pub fn stop_session(&self, id: &str) -> Result<(), ApiError> {
        let handle = self
            .sessions
            .write()
            .expect("session table poisoned")
            .remove(id)
            .ok_or_else(|| ApiError::unknown_session(id))?;
        handle.stop();
        Ok(())
    }

    /// Stops every session loop.
    pub fn shutdown(&self) {
        let handles: Vec<_> = self
            .sessions
            .write()
            .expect("session table poisoned")
            .drain()
            .map(|(_, h)| h)
            .collect();
        for h in handles {
            h.stop();
        }
    }
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_status).delete(delete_session))
        .route("/v1/sessions/{id}/comments", post(post_comment))
        .route("/v1/sessions/{id}/events", get(stream_events))
        .route("/v1/sessions/{id}/ablation", put(set_ablation))
        .route("/v1/products", get(list_products))
        .route("/v1/products/{routing_id}", get(product_detail))
        .with_state(gateway)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        service: "dialogue".into(),
    })
}

async fn create_session(
    State(gw): State<Arc<Gateway>>,
    body: Option<Json<CreateSessionRequest>>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let gw2 = gw.clone();
    let created = tokio::task::spawn_blocking(move || gw2.create_session(req.config, req.seed))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn session_status(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    let handle = gw.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    Ok(Json(handle.status()))
}

async fn delete_session(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    tokio::task::spawn_blocking(move || gw.stop_session(&id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_comment(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(req): Json<PostCommentRequest>,
) -> Result<(StatusCode, Json<CommentAck>), ApiError> {
    let ack = gw.post_comment(&id, req.text, req.author).await?;
    Ok((StatusCode::ACCEPTED, Json(ack)))
}

async fn set_ablation(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(flags): Json<AblationFlags>,
) -> Result<Json<AblationAck>, ApiError> {
    gw.set_ablation(&id, flags).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    from_seq: Option<u64>,
}

async fn stream_events(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = gw.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let last_event_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let from = q.from_seq.or(last_event_id).unwrap_or(0);
    Ok(Sse::new(event_stream(handle.hub.clone(), from)).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

fn sse_event(ev: &ApiEvent) -> Event {
    Event::default()
        .id(ev.seq.to_string())
        .event(ev.event.kind())
        .data(serde_json::to_string(ev).expect("events serialize"))
}

/// Every event with `seq > from`, then live events, until the session stops.
pub fn event_stream(hub: Arc<EventHub>, from: u64) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = hub.subscribe();
    let state = (hub, from, rx, std::collections::VecDeque::<ApiEvent>::new());
    stream::unfold(state, |(hub, mut cursor, mut rx, mut buf)| async move {
        loop {
            if let Some(ev) = buf.pop_front() {
                cursor = ev.seq;
                let out = sse_event(&ev);
                return Some((Ok(out), (hub, cursor, rx, buf)));
            }
            rx.borrow_and_update();
            let batch = hub.since(cursor);
            if !batch.is_empty() {
                buf.extend(batch);
                continue;
            }
            if hub.is_closed() || rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

async fn list_products(State(gw): State<Arc<Gateway>>) -> Json<Vec<ProductSummary>> {
    Json(
        gw.catalogue
            .products()
            .iter()
            .map(|p| ProductSummary {
                routing_id: p.routing_id,
                name: p.name.clone(),
                category: p.category,
                image_path: image_path(p.routing_id),
            })
            .collect(),
    )
}

async fn product_detail(
    State(gw): State<Arc<Gateway>>,
    Path(routing_id): Path<String>,
) -> Result<Json<ProductDetail>, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown product {routing_id}"));
    let id = routing_id.parse::<u64>().map(RoutingId).map_err(|_| not_found())?;
    let record = gw.catalogue.product(id).ok_or_else(not_found)?;
    Ok(Json(ProductDetail {
        record: record.clone(),
        image_path: image_path(id),
    }))
}
