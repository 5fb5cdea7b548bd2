//! Speech synthesis contract and the content-addressed stub synthesizer.

use std::collections::HashSet;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::visible_char_count;

pub const DEFAULT_SPEAKING_RATE: f64 = 4.0;

/// Size of the placeholder audio payload served for every stub asset.
pub const PLACEHOLDER_AUDIO_BYTES: usize = 1024;

pub const AUDIO_CONTENT_TYPE: &str = "audio/wav";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub asset_id: String,
    pub duration_ms: u64,
    /// Hex SHA-256 of the input text.
    pub text_hash: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediaError {
    #[error("synthesis text is empty")]
    EmptyText,
    #[error("unknown asset {0}")]
    UnknownAsset(String),
    #[error("media backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, text: &str) -> Result<SynthesisResult, MediaError>;
}

impl<T: Synthesizer + ?Sized> Synthesizer for std::sync::Arc<T> {
    fn synthesize(&self, text: &str) -> Result<SynthesisResult, MediaError> {
        (**self).synthesize(text)
    }
}

/// `ceil(chars / rate) · 1000`, counting non-whitespace characters.
pub fn stub_duration_ms(text: &str, chars_per_second: f64) -> u64 {
    let chars = visible_char_count(text) as f64;
    ((chars / chars_per_second).ceil() as u64) * 1000
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn asset_id_for(text: &str) -> String {
    format!("tts-{}", &text_hash(text)[..16])
}

/// A silent mono 16-bit PCM WAV file of exactly [`PLACEHOLDER_AUDIO_BYTES`].
pub fn placeholder_wav() -> Vec<u8> {
    let data_len = (PLACEHOLDER_AUDIO_BYTES - 44) as u32;
    let sample_rate: u32 = 16_000;
    let mut out = Vec::with_capacity(PLACEHOLDER_AUDIO_BYTES);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.resize(PLACEHOLDER_AUDIO_BYTES, 0);
    out
}

/// Deterministic synthesizer: durations from the speaking rate, a fixed
/// placeholder payload, and asset ids derived from the text.
#[derive(Debug)]
pub struct StubSynthesizer {
    chars_per_second: f64,
    assets: Mutex<HashSet<String>>,
}

impl Default for StubSynthesizer {
    fn default() -> Self {
        Self::new(DEFAULT_SPEAKING_RATE)
    }
}

impl StubSynthesizer {
    /// # Panics
    /// If the rate is not a positive finite number.
    pub fn new(chars_per_second: f64) -> Self {
        assert!(
            chars_per_second.is_finite() && chars_per_second > 0.0,
            "speaking rate must be positive"
        );
        Self {
            chars_per_second,
            assets: Mutex::new(HashSet::new()),
        }
    }

    pub fn speaking_rate(&self) -> f64 {
        self.chars_per_second
    }

    pub fn fetch(&self, asset_id: &str) -> Result<Vec<u8>, MediaError> {
        if self.assets.lock().expect("asset set poisoned").contains(asset_id) {
            Ok(placeholder_wav())
        } else {
            Err(MediaError::UnknownAsset(asset_id.to_string()))
        }
    }
}

impl Synthesizer for StubSynthesizer {
    fn synthesize(&self, text: &str) -> Result<SynthesisResult, MediaError> {
        if visible_char_count(text) == 0 {
            return Err(MediaError::EmptyText);
        }
        let result = SynthesisResult {
            asset_id: asset_id_for(text),
            duration_ms: stub_duration_ms(text, self.chars_per_second),
            text_hash: text_hash(text),
        };
        self.assets
            .lock()
            .expect("asset set poisoned")
            .insert(result.asset_id.clone());
        Ok(result)
    }
}
