//! Service configuration: one TOML file plus `LIVEHOST_*` environment
//! overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use livehost_core::rerank::RerankWeights;
use livehost_core::SessionConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {var}: {message}")]
    Env { var: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub listen: SocketAddr,
    /// Directory for per-session JSONL event logs. Unset disables logging.
    pub event_log_dir: Option<PathBuf>,
    /// Base seed for candidate sampling; each session derives its own.
    pub seed: u64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            event_log_dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediaSection {
    pub listen: SocketAddr,
    /// Base URL of a running media service. Unset: the gateway synthesizes
    /// in-process with the stub.
    pub endpoint: Option<String>,
    /// Product images named `<routing_id>.{png,jpg,svg}`.
    pub image_dir: Option<PathBuf>,
}

impl Default for MediaSection {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8081).into(),
            endpoint: None,
            image_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    /// Full URL of a generation endpoint. Unset: the catalogue stub backend.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Catalogue TOML. Unset: the bundled catalogue.
    pub catalogue: Option<PathBuf>,
    /// Dialogue TOML (persona, sampling, lexicons). Unset: bundled.
    pub dialogue: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub gateway: GatewaySection,
    pub media: MediaSection,
    pub backend: BackendSection,
    pub data: DataSection,
    /// Defaults for new sessions.
    pub session: SessionConfig,
    /// Overrides the reranker weights from the dialogue config.
    pub weights: Option<RerankWeights>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Optional file, then the process environment.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies `LIVEHOST_*` overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(var: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                var: var.into(),
                message: e.to_string(),
            })
        }
        let opt = |v: String| (!v.trim().is_empty()).then_some(v);

        if let Some(v) = lookup("LIVEHOST_GATEWAY_LISTEN") {
            self.gateway.listen = parse("LIVEHOST_GATEWAY_LISTEN", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_MEDIA_LISTEN") {
            self.media.listen = parse("LIVEHOST_MEDIA_LISTEN", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_MEDIA_ENDPOINT") {
            self.media.endpoint = opt(v);
        }
        if let Some(v) = lookup("LIVEHOST_IMAGE_DIR") {
            self.media.image_dir = opt(v).map(PathBuf::from);
        }
        if let Some(v) = lookup("LIVEHOST_BACKEND_ENDPOINT") {
            self.backend.endpoint = opt(v);
        }
        if let Some(v) = lookup("LIVEHOST_BACKEND_TIMEOUT_MS") {
            self.backend.timeout_ms = parse("LIVEHOST_BACKEND_TIMEOUT_MS", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_CATALOGUE") {
            self.data.catalogue = opt(v).map(PathBuf::from);
        }
        if let Some(v) = lookup("LIVEHOST_DIALOGUE_CONFIG") {
            self.data.dialogue = opt(v).map(PathBuf::from);
        }
        if let Some(v) = lookup("LIVEHOST_EVENT_LOG_DIR") {
            self.gateway.event_log_dir = opt(v).map(PathBuf::from);
        }
        if let Some(v) = lookup("LIVEHOST_SEED") {
            self.gateway.seed = parse("LIVEHOST_SEED", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_HOLD_PERIOD_MS") {
            self.session.hold_period_ms = parse("LIVEHOST_HOLD_PERIOD_MS", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_SPEAKING_RATE") {
            self.session.speaking_rate = parse("LIVEHOST_SPEAKING_RATE", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_QUEUE_CAPACITY") {
            self.session.comment_queue_capacity = parse("LIVEHOST_QUEUE_CAPACITY", &v)?;
        }
        if let Some(v) = lookup("LIVEHOST_WEIGHTS") {
            let mut w = self.weights.unwrap_or_default();
            for part in v.split(',').filter(|p| !p.trim().is_empty()) {
                let (name, value) = part.split_once('=').ok_or_else(|| ConfigError::Env {
                    var: "LIVEHOST_WEIGHTS".into(),
                    message: format!("expected name=value, got {part:?}"),
                })?;
                let value: f64 = parse("LIVEHOST_WEIGHTS", value)?;
                let slot = match name.trim() {
                    "relevance" => &mut w.relevance,
                    "misalignment" => &mut w.misalignment,
                    "unsanctioned" => &mut w.unsanctioned,
                    "repetition" => &mut w.repetition,
                    "formulaic" => &mut w.formulaic,
                    "overlap" => &mut w.overlap,
                    other => {
                        return Err(ConfigError::Env {
                            var: "LIVEHOST_WEIGHTS".into(),
                            message: format!("unknown weight {other:?}"),
                        })
                    }
                };
                *slot = value;
            }
            self.weights = Some(w);
        }
        self.session
            .validate()
            .map_err(|e| ConfigError::Parse(e.to_string()))
    }
}
