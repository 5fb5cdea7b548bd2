//! Rule-based intent classification with an optional model-backed classifier.

use serde::{Deserialize, Serialize};

use super::backend::BackendError;
use super::{IntentLabel, ViewerComment};
use crate::text::normalize;

/// Cue lexicons for the rule-based classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentLexicon {
    pub question: Vec<String>,
    pub praise: Vec<String>,
    pub doubt: Vec<String>,
    pub hostility: Vec<String>,
}

impl IntentLexicon {
    /// Rule-based label. Priority on multiple hits is
    /// Antagonism > Scepticism > Inquiry > Appreciation; no hits → Inquiry.
    pub fn classify(&self, text: &str) -> IntentLabel {
        let text = normalize(text);
        let hit = |words: &[String]| words.iter().any(|w| !w.is_empty() && text.contains(&normalize(w)));
        if hit(&self.hostility) {
            IntentLabel::Antagonism
        } else if hit(&self.doubt) {
            IntentLabel::Scepticism
        } else if hit(&self.question) {
            IntentLabel::Inquiry
        } else if hit(&self.praise) {
            IntentLabel::Appreciation
        } else {
            IntentLabel::Inquiry
        }
    }
}

/// A model-backed classifier.
pub trait IntentClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<IntentLabel, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationSource {
    Rules,
    Backend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: IntentLabel,
    pub source: ClassificationSource,
    /// Set when a configured backend failed and the rules were used instead.
    pub degraded: bool,
}

pub fn classify_intent(
    comment: &ViewerComment,
    lexicon: &IntentLexicon,
    backend: Option<&dyn IntentClassifier>,
) -> Classification {
    match backend {
        Some(b) => match b.classify(&comment.text) {
            Ok(label) => Classification {
                label,
                source: ClassificationSource::Backend,
                degraded: false,
            },
            Err(_) => Classification {
                label: lexicon.classify(&comment.text),
                source: ClassificationSource::Rules,
                degraded: true,
            },
        },
        None => Classification {
            label: lexicon.classify(&comment.text),
            source: ClassificationSource::Rules,
            degraded: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DialogueConfig;
    use crate::dialogue::CommentId;

    fn comment(text: &str) -> ViewerComment {
        ViewerComment::new(CommentId(0), text, "u", 0).unwrap()
    }

    struct Failing;
    impl IntentClassifier for Failing {
        fn classify(&self, _: &str) -> Result<IntentLabel, BackendError> {
            Err(BackendError::Failure {
                message: "down".into(),
                partial: vec![],
            })
        }
    }

    struct Fixed(IntentLabel);
    impl IntentClassifier for Fixed {
        fn classify(&self, _: &str) -> Result<IntentLabel, BackendError> {
            Ok(self.0)
        }
    }

    #[test]
    fn rule_examples() {
        let lex = DialogueConfig::bundled().intent;
        assert_eq!(lex.classify("主播有什么推荐的面霜吗"), IntentLabel::Inquiry);
        assert_eq!(lex.classify("……"), IntentLabel::Inquiry);
        // 真的有 (doubt) and 吗 (question) both hit; doubt outranks question.
        assert_eq!(lex.classify("这个真的有效果吗"), IntentLabel::Scepticism);
        assert_eq!(lex.classify("回购第三瓶了，太好用了"), IntentLabel::Appreciation);
        // 骗子 hits hostility and 骗 hits doubt.
        assert_eq!(lex.classify("骗子主播"), IntentLabel::Antagonism);
    }

    #[test]
    fn backend_failure_degrades_to_rules() {
        let lex = DialogueConfig::bundled().intent;
        let c = comment("太好看了爱了");
        let out = classify_intent(&c, &lex, Some(&Failing));
        assert_eq!(out.label, IntentLabel::Appreciation);
        assert!(out.degraded);
        let out = classify_intent(&c, &lex, Some(&Fixed(IntentLabel::Antagonism)));
        assert_eq!(out.label, IntentLabel::Antagonism);
        assert!(!out.degraded);
        assert_eq!(out.source, ClassificationSource::Backend);
    }
}
