//! Generation backend contract and the deterministic template stub.
//!
//! A backend takes a prompt plus sampling parameters and returns `n` raw
//! strings in the labeled-line format. The remote HTTP client lives in the
//! server crate; this module holds the trait and the stub used by tests, the
//! evaluation kit and offline demos.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{parse_context_block, parse_intent_tag};
use super::response::render_response;
use super::{GenerationRequest, HostResponse, IntentLabel};
use crate::catalogue::{Catalogue, ProductRecord};

/// Wire request for a generation backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub seed: u64,
}

impl BackendRequest {
    pub fn from_generation(req: &GenerationRequest, prompt: String, seed: u64) -> Self {
        Self {
            prompt,
            n: req.sampling.candidates,
            temperature: req.sampling.temperature,
            top_p: req.sampling.top_p,
            repetition_penalty: req.sampling.repetition_penalty,
            seed,
        }
    }
}

/// Wire response for a generation backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub candidates: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend timed out after {elapsed_ms} ms ({} partial results)", partial.len())]
    Timeout { elapsed_ms: u64, partial: Vec<String> },
    #[error("backend failure: {message} ({} partial results)", partial.len())]
    Failure { message: String, partial: Vec<String> },
}

impl BackendError {
    pub fn partial(&self) -> &[String] {
        match self {
            BackendError::Timeout { partial, .. } | BackendError::Failure { partial, .. } => partial,
        }
    }
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError>;
}

impl<T: GenerationBackend + ?Sized> GenerationBackend for Arc<T> {
    fn generate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

/// Calls the backend and enforces that exactly `candidates` outputs return.
pub fn generate_candidates(
    req: &GenerationRequest,
    prompt: &str,
    backend: &dyn GenerationBackend,
    seed: u64,
) -> Result<Vec<String>, BackendError> {
    let wire = BackendRequest::from_generation(req, prompt.to_string(), seed);
    let mut out = backend.generate(&wire)?;
    if out.len() < wire.n {
        return Err(BackendError::Failure {
            message: format!("expected {} candidates, got {}", wire.n, out.len()),
            partial: out,
        });
    }
    out.truncate(wire.n);
    Ok(out)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

const SLOGANS: &[&str] = &[
    "今日直播间专属好价",
    "姐妹们闭眼入不踩雷",
    "宠粉福利限时开抢",
    "认真护肤从今天开始",
    "好物分享一起变美吧",
];

const CTAS: &[&str] = &[
    "点击下方小黄车领券下单",
    "点击购物车链接立即抢购",
    "关注主播领取专属优惠券",
];

fn openings(intent: Option<IntentLabel>) -> &'static [&'static str] {
    match intent {
        Some(IntentLabel::Inquiry) => &["我自己也是敏感肌，", "这个问题问得好，", "给你认真讲讲，"],
        Some(IntentLabel::Scepticism) => &["理解你的顾虑，", "不用急着相信我，", "担心是正常的，"],
        Some(IntentLabel::Appreciation) => &["谢谢宝贝的认可，", "好多姐妹都在回购，", "你的眼光真的好，"],
        Some(IntentLabel::Antagonism) => &["哈哈别生气嘛，", "主播脸皮厚不怕说，", "先喝口水消消气，"],
        None => &["来看这里，", "跟大家说一下，", "说到这个，"],
    }
}

fn hooks(intent: Option<IntentLabel>) -> &'static [&'static str] {
    match intent {
        Some(IntentLabel::Inquiry) => &["你们平时是什么肤质呀？", "你现在用的是哪一步护肤呢？"],
        Some(IntentLabel::Scepticism) => &["要不要我现场给大家上脸试一下？", "你最担心的是哪一点呢？"],
        Some(IntentLabel::Appreciation) => &["用过的姐妹扣个1好不好？", "你最喜欢它哪一点呀？"],
        Some(IntentLabel::Antagonism) => &["要不先领个小样试试再说？", "给主播一个机会好不好？"],
        None => &["还有什么想问的吗？", "大家平时是什么肤质呀？"],
    }
}

/// Deterministic backend that composes responses from catalogue text only.
///
/// The active product is recovered from the prompt's context block and the
/// intent from its tag line, so ablated prompts yield correspondingly generic
/// output. Output is a pure function of `(prompt, seed, n)`.
#[derive(Debug, Clone)]
pub struct StubBackend {
    catalogue: Arc<Catalogue>,
    stock_openings: Vec<String>,
    malformed_rate: f64,
}

impl StubBackend {
    pub fn new(catalogue: Arc<Catalogue>) -> Self {
        Self {
            catalogue,
            stock_openings: Vec::new(),
            malformed_rate: 0.0,
        }
    }

    /// Stock phrases the stub will sometimes open with, so reranking has
    /// something to penalize.
    pub fn with_stock_openings(mut self, openings: Vec<String>) -> Self {
        self.stock_openings = openings;
        self
    }

    /// Fraction of candidates emitted with a schema violation.
    pub fn with_malformed_rate(mut self, rate: f64) -> Self {
        self.malformed_rate = rate.clamp(0.0, 1.0);
        self
    }

    fn product_from_prompt(&self, prompt: &str) -> Option<&ProductRecord> {
        let block = parse_context_block(prompt)?;
        let name = block.lines().next()?.strip_prefix("商品：")?;
        self.catalogue.product_by_name(name.trim())
    }

    fn compose(
        &self,
        rng: &mut ChaCha8Rng,
        product: Option<&ProductRecord>,
        intent: Option<IntentLabel>,
    ) -> HostResponse {
        let mut opening = openings(intent).choose(rng).copied().unwrap_or("").to_string();
        if !self.stock_openings.is_empty() && rng.random_bool(0.3) {
            let stock = self.stock_openings.choose(rng).expect("non-empty");
            opening = format!("{stock}，{opening}");
        }
        let spoken = match product {
            Some(p) => {
                let tp = p.talking_points.choose(rng).map(String::as_str).unwrap_or("");
                let mut s = if rng.random_bool(0.85) {
                    format!("{opening}{}，{tp}。", p.name)
                } else {
                    format!("{opening}{tp}。")
                };
                if rng.random_bool(0.5) {
                    if let Some(ing) = p.ingredients.choose(rng) {
                        s.push_str(&format!("里面的{}主打{}。", ing.name, ing.role));
                    }
                }
                s
            }
            None => format!("{opening}直播间每一款的成分和用法都可以问我。"),
        };
        HostResponse {
            spoken,
            slogan: SLOGANS.choose(rng).expect("non-empty").to_string(),
            hook_question: hooks(intent).choose(rng).expect("non-empty").to_string(),
            cta: CTAS.choose(rng).expect("non-empty").to_string(),
        }
    }
}

impl GenerationBackend for StubBackend {
    fn generate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(req.prompt.as_bytes()) ^ req.seed);
        let product = self.product_from_prompt(&req.prompt);
        let intent = parse_intent_tag(&req.prompt);
        let mut out = Vec::with_capacity(req.n);
        for _ in 0..req.n {
            let mut resp = self.compose(&mut rng, product, intent);
            if self.malformed_rate > 0.0 && rng.random_bool(self.malformed_rate) {
                resp.slogan = "好价".to_string();
            }
            out.push(render_response(&resp));
        }
        Ok(out)
    }
}
