//! Request, response and event bodies shared by the services and their
//! clients. All bodies are `application/json`.

use livehost_core::catalogue::{Category, ProductRecord, RoutingId};
use livehost_core::dialogue::{AblationFlags, CommentId, Millis};
use livehost_core::session::{EventRecord, SessionEvent, SessionStage};
use serde::{Deserialize, Serialize};

/// One entry of the event stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEvent {
    /// Starts at 1 and increases by one per event within a session.
    pub seq: u64,
    pub session_id: String,
    /// Server wall clock, milliseconds since the Unix epoch.
    pub server_time_ms: u64,
    /// Session clock at which the event took effect.
    pub session_time_ms: Millis,
    #[serde(flatten)]
    pub event: SessionEvent,
}

impl ApiEvent {
    pub fn record(&self) -> EventRecord {
        EventRecord {
            at: self.session_time_ms,
            event: self.event.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSessionRequest {
    /// Partial session config laid over the service defaults.
    pub config: Option<serde_json::Map<String, serde_json::Value>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub stage: SessionStage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub stage: SessionStage,
    pub ablation: AblationFlags,
    pub queue_len: usize,
    pub focus: Option<RoutingId>,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostCommentRequest {
    pub text: String,
    #[serde(default)]
    pub author: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentAck {
    pub comment_id: CommentId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationAck {
    pub ablation: AblationFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSummary {
    pub routing_id: RoutingId,
    pub name: String,
    pub category: Category,
    /// Path on the media service.
    pub image_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDetail {
    #[serde(flatten)]
    pub record: ProductRecord,
    pub image_path: String,
}

pub fn image_path(id: RoutingId) -> String {
    format!("/v1/products/{id}/image")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub service: String,
}
