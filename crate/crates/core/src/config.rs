//! Dialogue configuration document (persona, sampling, reranker weights,
//! phrase lists, judge rubrics).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::intent::IntentLexicon;
use crate::dialogue::prompt::{COMMENT_TAG, CONTEXT_CLOSE, CONTEXT_OPEN, INTENT_TAG};
use crate::dialogue::SamplingParams;
use crate::rerank::RerankWeights;

const BUNDLED_DIALOGUE: &str = include_str!("../data/dialogue.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankSettings {
    #[serde(default = "default_ngram")]
    pub ngram: usize,
    #[serde(default)]
    pub stock_openings: Vec<String>,
}

fn default_ngram() -> usize {
    3
}

/// Text used when every generated candidate fails the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackTemplates {
    pub slogan: String,
    pub hook: String,
    pub cta: String,
    pub generic_spoken: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeRubrics {
    pub creativity: String,
    pub engagement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueConfig {
    pub persona: String,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub weights: RerankWeights,
    pub rerank: RerankSettings,
    pub fallback: FallbackTemplates,
    pub intent: IntentLexicon,
    pub judge: JudgeRubrics,
}

impl DialogueConfig {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_DIALOGUE).expect("bundled dialogue config is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_DIALOGUE
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: DialogueConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sampling
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.rerank.ngram == 0 {
            return Err(ConfigError::Invalid("rerank.ngram must be >= 1".into()));
        }
        for marker in [INTENT_TAG, CONTEXT_OPEN, CONTEXT_CLOSE, COMMENT_TAG] {
            if self.persona.contains(marker) {
                return Err(ConfigError::Invalid(format!(
                    "persona must not contain the section marker {marker}"
                )));
            }
        }
        for rubric in [&self.judge.creativity, &self.judge.engagement] {
            if !rubric.contains("{response}") {
                return Err(ConfigError::Invalid(
                    "judge rubric must contain a {response} placeholder".into(),
                ));
            }
        }
        Ok(())
    }
}
