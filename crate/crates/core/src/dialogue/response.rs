//! The four-field host response and its labeled-line wire format.
//!
//! ```text
//! SPOKEN: <one or two sentences>
//! SLOGAN: <8 to 12 characters>
//! HOOK: <question ending in ？ or ?>
//! CTA: <call to action>
//! ```
//!
//! Labels may appear in any order; unlabeled lines are ignored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_count, sentence_count, QUESTION_TERMINATORS};

pub const SLOGAN_MIN_CHARS: usize = 8;
pub const SLOGAN_MAX_CHARS: usize = 12;
pub const SPOKEN_MAX_SENTENCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseField {
    Spoken,
    Slogan,
    Hook,
    Cta,
}

impl ResponseField {
    pub const ALL: [ResponseField; 4] = [
        ResponseField::Spoken,
        ResponseField::Slogan,
        ResponseField::Hook,
        ResponseField::Cta,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ResponseField::Spoken => "SPOKEN",
            ResponseField::Slogan => "SLOGAN",
            ResponseField::Hook => "HOOK",
            ResponseField::Cta => "CTA",
        }
    }
}

impl fmt::Display for ResponseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("{0}: missing_field")]
    MissingField(ResponseField),
    #[error("{0}: duplicate_field")]
    DuplicateField(ResponseField),
    #[error("SPOKEN: sentence_count ({found} sentences, expected 1-2)")]
    SentenceCount { found: usize },
    #[error("SLOGAN: slogan_length ({found} characters, expected 8-12)")]
    SloganLength { found: usize },
    #[error("HOOK: empty")]
    EmptyHook,
    #[error("HOOK: not_a_question")]
    HookNotQuestion,
    #[error("CTA: empty")]
    EmptyCta,
}

impl SchemaError {
    pub fn field(&self) -> ResponseField {
        match self {
            SchemaError::MissingField(f) | SchemaError::DuplicateField(f) => *f,
            SchemaError::SentenceCount { .. } => ResponseField::Spoken,
            SchemaError::SloganLength { .. } => ResponseField::Slogan,
            SchemaError::EmptyHook | SchemaError::HookNotQuestion => ResponseField::Hook,
            SchemaError::EmptyCta => ResponseField::Cta,
        }
    }

    pub fn rule(&self) -> &'static str {
        match self {
            SchemaError::MissingField(_) => "missing_field",
            SchemaError::DuplicateField(_) => "duplicate_field",
            SchemaError::SentenceCount { .. } => "sentence_count",
            SchemaError::SloganLength { .. } => "slogan_length",
            SchemaError::EmptyHook => "empty",
            SchemaError::HookNotQuestion => "not_a_question",
            SchemaError::EmptyCta => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HostResponse {
    pub spoken: String,
    pub slogan: String,
    pub hook_question: String,
    pub cta: String,
}

impl HostResponse {
    /// Builds a response, enforcing every field rule.
    pub fn new(
        spoken: impl Into<String>,
        slogan: impl Into<String>,
        hook_question: impl Into<String>,
        cta: impl Into<String>,
    ) -> Result<Self, SchemaError> {
        let r = HostResponse {
            spoken: spoken.into(),
            slogan: slogan.into(),
            hook_question: hook_question.into(),
            cta: cta.into(),
        };
        r.validate()?;
        Ok(r)
    }

    /// Checks the field rules in field order and reports the first failure.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let sentences = sentence_count(&self.spoken);
        if !(1..=SPOKEN_MAX_SENTENCES).contains(&sentences) {
            return Err(SchemaError::SentenceCount { found: sentences });
        }
        let slogan_chars = char_count(self.slogan.trim());
        if !(SLOGAN_MIN_CHARS..=SLOGAN_MAX_CHARS).contains(&slogan_chars) {
            return Err(SchemaError::SloganLength {
                found: slogan_chars,
            });
        }
        let hook = self.hook_question.trim();
        if hook.is_empty() {
            return Err(SchemaError::EmptyHook);
        }
        if !hook.ends_with(QUESTION_TERMINATORS) {
            return Err(SchemaError::HookNotQuestion);
        }
        if self.cta.trim().is_empty() {
            return Err(SchemaError::EmptyCta);
        }
        Ok(())
    }

    pub fn field(&self, field: ResponseField) -> &str {
        match field {
            ResponseField::Spoken => &self.spoken,
            ResponseField::Slogan => &self.slogan,
            ResponseField::Hook => &self.hook_question,
            ResponseField::Cta => &self.cta,
        }
    }

    /// All four fields joined, for lexicon scans.
    pub fn full_text(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}",
            self.spoken, self.slogan, self.hook_question, self.cta
        )
    }
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(label)?;
    rest.strip_prefix(':')
        .or_else(|| rest.strip_prefix('：'))
        .map(str::trim)
}

/// Parses the labeled-line wire format.
pub fn parse_response(raw: &str) -> Result<HostResponse, SchemaError> {
    let mut slots: [Option<String>; 4] = Default::default();
    for line in raw.lines() {
        let line = line.trim();
        for (i, field) in ResponseField::ALL.iter().enumerate() {
            if let Some(value) = strip_label(line, field.label()) {
                if slots[i].is_some() {
                    return Err(SchemaError::DuplicateField(*field));
                }
                slots[i] = Some(value.to_string());
                break;
            }
        }
    }
    let mut take = |i: usize| slots[i].take().ok_or(SchemaError::MissingField(ResponseField::ALL[i]));
    let spoken = take(0)?;
    let slogan = take(1)?;
    let hook_question = take(2)?;
    let cta = take(3)?;
    HostResponse::new(spoken, slogan, hook_question, cta)
}

pub fn render_response(resp: &HostResponse) -> String {
    format!(
        "SPOKEN: {}\nSLOGAN: {}\nHOOK: {}\nCTA: {}",
        resp.spoken, resp.slogan, resp.hook_question, resp.cta
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = "SPOKEN: 我自己也是敏感肌，这款神经酰胺修护面霜换季就靠它稳住。\n\
                         SLOGAN: 换季稳住屏障不慌张\n\
                         HOOK: 你们平时是什么肤质呀？\n\
                         CTA: 点击下方小黄车领券下单";

    #[test]
    fn parses_well_formed() {
        let r = parse_response(VALID).unwrap();
        assert_eq!(r.slogan, "换季稳住屏障不慌张");
        assert_eq!(r.hook_question, "你们平时是什么肤质呀？");
        assert_eq!(parse_response(&render_response(&r)).unwrap(), r);
    }

    #[test]
    fn seven_char_slogan_rejected() {
        let raw = VALID.replace("换季稳住屏障不慌张", "水润修护敏感肌");
        let err = parse_response(&raw).unwrap_err();
        assert_eq!(err, SchemaError::SloganLength { found: 7 });
        assert_eq!(err.field(), ResponseField::Slogan);
        assert_eq!(err.rule(), "slogan_length");
    }

    #[test]
    fn three_sentences_rejected() {
        let raw = VALID.replace(
            "我自己也是敏感肌，这款神经酰胺修护面霜换季就靠它稳住。",
            "好用。真的好用！快买？",
        );
        assert_eq!(
            parse_response(&raw).unwrap_err(),
            SchemaError::SentenceCount { found: 3 }
        );
    }

    #[test]
    fn missing_and_duplicate_fields() {
        let raw = VALID.replace("CTA: 点击下方小黄车领券下单", "");
        assert_eq!(
            parse_response(&raw).unwrap_err(),
            SchemaError::MissingField(ResponseField::Cta)
        );
        let raw = format!("{VALID}\nSLOGAN: 再来一次的重复标语");
        assert_eq!(
            parse_response(&raw).unwrap_err(),
            SchemaError::DuplicateField(ResponseField::Slogan)
        );
    }

    #[test]
    fn hook_must_be_a_question() {
        let raw = VALID.replace("你们平时是什么肤质呀？", "快来下单");
        assert_eq!(parse_response(&raw).unwrap_err(), SchemaError::HookNotQuestion);
    }

    #[test]
    fn drift_lines_and_fullwidth_colon_tolerated() {
        let raw = format!("好的，以下是回复：\n{}", VALID.replace("CTA:", "CTA："));
        assert!(parse_response(&raw).is_ok());
    }

    #[test]
    fn latin_slogan_counts_per_character() {
        let raw = VALID.replace("换季稳住屏障不慌张", "SPF50+轻薄");
        assert!(parse_response(&raw).is_ok());
        let raw = VALID.replace("换季稳住屏障不慌张", "SPF50+");
        assert_eq!(
            parse_response(&raw).unwrap_err(),
            SchemaError::SloganLength { found: 6 }
        );
    }
}
