//! Core of the virtual live-commerce host: product knowledge base, grounded
//! response generation and reranking, the narration/interaction session
//! machine, dataset cleaning and evaluation.

pub mod catalogue;
pub mod config;
pub mod datapipe;
pub mod dialogue;
pub mod evalkit;
pub mod media;
pub mod pipeline;
pub mod rerank;
pub mod runner;
pub mod session;
pub mod text;

pub use catalogue::{
    load_catalogue, serialize_for_prompt, Catalogue, CatalogueError, Category, ProductRecord,
    RetrievalResult, RoutingId,
};
pub use config::DialogueConfig;
pub use dialogue::{
    AblationFlags, CommentId, GenerationBackend, HostResponse, IntentLabel, Millis, StubBackend,
    ViewerComment,
};
pub use media::{StubSynthesizer, SynthesisResult, Synthesizer};
pub use pipeline::{Pipeline, TurnOutcome};
pub use rerank::{Candidate, RecentHistory, RerankScore, RerankWeights};
pub use runner::SessionRunner;
pub use session::{EventRecord, Session, SessionConfig, SessionEvent, SessionStage};
