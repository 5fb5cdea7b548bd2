//! Intent-conditioned, catalogue-grounded response generation.
//!
//! A viewer comment is classified into one of four intents, each tied to a
//! discourse strategy. The prompt carries the persona, the intent tag and the
//! serialized product record; a pluggable backend returns raw candidates in the
//! four-line wire format, which [`response::parse_response`] validates.

pub mod backend;
pub mod claims;
pub mod intent;
pub mod prompt;
pub mod response;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{generate_candidates, BackendError, BackendRequest, GenerationBackend, StubBackend};
pub use claims::{validate_claims, ClaimViolation};
pub use intent::{classify_intent, Classification, IntentClassifier, IntentLexicon};
pub use prompt::assemble_prompt;
pub use response::{parse_response, render_response, HostResponse, ResponseField, SchemaError};

/// Monotonic session time in milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommentId(pub u64);

impl fmt::Display for CommentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommentError {
    #[error("comment text is empty")]
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewerComment {
    pub comment_id: CommentId,
    pub text: String,
    /// Pseudonymized handle; see [`pseudonymize`].
    pub author: String,
    pub arrival_time: Millis,
}

impl ViewerComment {
    /// Builds a comment, pseudonymizing the raw platform handle.
    pub fn new(
        comment_id: CommentId,
        text: impl Into<String>,
        raw_author: &str,
        arrival_time: Millis,
    ) -> Result<Self, CommentError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CommentError::EmptyText);
        }
        Ok(Self {
            comment_id,
            text,
            author: pseudonymize(raw_author),
            arrival_time,
        })
    }
}

/// Stable pseudonym for a raw platform handle.
pub fn pseudonymize(raw_author: &str) -> String {
    let digest = Sha256::digest(raw_author.as_bytes());
    format!("viewer-{}", &hex::encode(digest)[..10])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntentLabel {
    Inquiry,
    Scepticism,
    Appreciation,
    Antagonism,
}

impl IntentLabel {
    pub const ALL: [IntentLabel; 4] = [
        IntentLabel::Inquiry,
        IntentLabel::Scepticism,
        IntentLabel::Appreciation,
        IntentLabel::Antagonism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentLabel::Inquiry => "Inquiry",
            IntentLabel::Scepticism => "Scepticism",
            IntentLabel::Appreciation => "Appreciation",
            IntentLabel::Antagonism => "Antagonism",
        }
    }

    pub fn label_zh(self) -> &'static str {
        match self {
            IntentLabel::Inquiry => "咨询",
            IntentLabel::Scepticism => "质疑",
            IntentLabel::Appreciation => "赞赏",
            IntentLabel::Antagonism => "挑衅",
        }
    }

    pub fn parse(s: &str) -> Option<IntentLabel> {
        IntentLabel::ALL.into_iter().find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscourseStrategy {
    AuthoritativeGuidance,
    SocialProofAmplification,
    EmpatheticRebuttal,
    HumorDeflection,
}

impl DiscourseStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscourseStrategy::AuthoritativeGuidance => "AuthoritativeGuidance",
            DiscourseStrategy::SocialProofAmplification => "SocialProofAmplification",
            DiscourseStrategy::EmpatheticRebuttal => "EmpatheticRebuttal",
            DiscourseStrategy::HumorDeflection => "HumorDeflection",
        }
    }

    /// Instruction text placed on the intent tag line.
    pub fn instruction(self) -> &'static str {
        match self {
            DiscourseStrategy::AuthoritativeGuidance => "专业讲解，给出明确的产品建议",
            DiscourseStrategy::SocialProofAmplification => "放大好评，借助口碑带动氛围",
            DiscourseStrategy::EmpatheticRebuttal => "先共情，再用资料中的事实回应疑虑",
            DiscourseStrategy::HumorDeflection => "幽默化解，不争辩，把话题带回商品",
        }
    }

    pub fn intent(self) -> IntentLabel {
        match self {
            DiscourseStrategy::AuthoritativeGuidance => IntentLabel::Inquiry,
            DiscourseStrategy::SocialProofAmplification => IntentLabel::Appreciation,
            DiscourseStrategy::EmpatheticRebuttal => IntentLabel::Scepticism,
            DiscourseStrategy::HumorDeflection => IntentLabel::Antagonism,
        }
    }
}

/// Intent to strategy mapping; total and bijective.
pub fn strategy_for(intent: IntentLabel) -> DiscourseStrategy {
    match intent {
        IntentLabel::Inquiry => DiscourseStrategy::AuthoritativeGuidance,
        IntentLabel::Appreciation => DiscourseStrategy::SocialProofAmplification,
        IntentLabel::Scepticism => DiscourseStrategy::EmpatheticRebuttal,
        IntentLabel::Antagonism => DiscourseStrategy::HumorDeflection,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub candidates: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.9,
            top_p: 0.92,
            repetition_penalty: 1.12,
            candidates: 6,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RequestError {
    #[error("candidates must be at least 1")]
    NoCandidates,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("top_p must lie in (0, 1], got {0}")]
    TopP(f64),
    #[error("repetition penalty must be positive, got {0}")]
    RepetitionPenalty(f64),
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.candidates == 0 {
            return Err(RequestError::NoCandidates);
        }
        if !(self.temperature > 0.0) {
            return Err(RequestError::Temperature(self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(RequestError::TopP(self.top_p));
        }
        if !(self.repetition_penalty > 0.0) {
            return Err(RequestError::RepetitionPenalty(self.repetition_penalty));
        }
        Ok(())
    }
}

/// Runtime ablation switches: interaction-type tags, product context
/// injection and reranking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationFlags {
    pub tt_disabled: bool,
    pub pci_disabled: bool,
    pub rr_disabled: bool,
}

impl AblationFlags {
    pub const BASELINE: AblationFlags = AblationFlags {
        tt_disabled: false,
        pci_disabled: false,
        rr_disabled: false,
    };

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.tt_disabled {
            parts.push("tt_disabled");
        }
        if self.pci_disabled {
            parts.push("pci_disabled");
        }
        if self.rr_disabled {
            parts.push("rr_disabled");
        }
        if parts.is_empty() {
            "baseline".to_string()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub system_prompt: String,
    pub intent: IntentLabel,
    pub comment: ViewerComment,
    pub product_context: Option<String>,
    pub sampling: SamplingParams,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        self.sampling.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_examples() {
        assert_eq!(
            strategy_for(IntentLabel::Inquiry),
            DiscourseStrategy::AuthoritativeGuidance
        );
        assert_eq!(
            strategy_for(IntentLabel::Antagonism),
            DiscourseStrategy::HumorDeflection
        );
        assert_eq!(
            strategy_for(IntentLabel::Appreciation),
            DiscourseStrategy::SocialProofAmplification
        );
        assert_eq!(
            strategy_for(IntentLabel::Scepticism),
            DiscourseStrategy::EmpatheticRebuttal
        );
    }

    #[test]
    fn strategy_is_bijective() {
        let strategies: std::collections::HashSet<_> =
            IntentLabel::ALL.iter().map(|&i| strategy_for(i)).collect();
        assert_eq!(strategies.len(), 4);
        for intent in IntentLabel::ALL {
            assert_eq!(strategy_for(intent).intent(), intent);
        }
    }

    #[test]
    fn comment_rejects_blank_text_and_hides_handle() {
        assert_eq!(
            ViewerComment::new(CommentId(1), "  \n", "douyin_user_123", 0),
            Err(CommentError::EmptyText)
        );
        let c = ViewerComment::new(CommentId(1), "你好", "douyin_user_123", 0).unwrap();
        assert!(!c.author.contains("douyin_user_123"));
        assert!(c.author.starts_with("viewer-"));
        assert_eq!(c.author, pseudonymize("douyin_user_123"));
    }

    #[test]
    fn sampling_validation() {
        assert!(SamplingParams::default().validate().is_ok());
        let bad = SamplingParams {
            temperature: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(RequestError::Temperature(0.0)));
    }
}
