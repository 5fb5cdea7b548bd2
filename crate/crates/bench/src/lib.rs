//! Input generators for the benchmarks.

use livehost_core::datapipe::{DatasetInstance, Source};
use livehost_core::{HostResponse, IntentLabel};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHABET: &str = "面霜精华防晒洁面乳液保湿修护敏感肌油皮干皮推荐适合吗怎么用效果成分温和清爽滋润质地价格活动主播";

pub const COMMENTS: &[&str] = &[
    "主播有什么推荐的面霜吗",
    "防晒霜会不会很油",
    "洁面适合敏感肌吗",
    "这个真的有用吗？",
    "太好用了爱了",
    "精华怎么用",
];

/// `n` comments of 8-24 characters; about a third are edits of earlier ones.
pub fn dataset(n: usize, seed: u64) -> Vec<DatasetInstance> {
    let alphabet: Vec<char> = ALPHABET.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comments: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let text = if !comments.is_empty() && rng.random_bool(0.3) {
            let mut chars: Vec<char> = comments.choose(&mut rng).unwrap().chars().collect();
            let pos = rng.random_range(0..chars.len());
            chars[pos] = *alphabet.choose(&mut rng).unwrap();
            chars.into_iter().collect()
        } else {
            let len = rng.random_range(8..24);
            (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect()
        };
        comments.push(text);
    }
    comments
        .into_iter()
        .enumerate()
        .map(|(i, comment)| DatasetInstance {
            system_prompt: "persona".into(),
            response: HostResponse {
                spoken: format!("{comment}。"),
                slogan: "今日直播间专属好价".into(),
                hook_question: "你是什么肤质呀？".into(),
                cta: "点击下方小黄车".into(),
            },
            comment,
            intent: IntentLabel::ALL[i % 4],
            source: Source::Real,
            pair_id: format!("p{i}"),
            naturalness: None,
        })
        .collect()
}

/// Ratings on a 1-5 scale with roughly 70% agreement.
pub fn ratings(items: usize, annotators: usize, seed: u64) -> Vec<Vec<Option<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..items)
        .map(|_| {
            let truth = rng.random_range(1..=5);
            (0..annotators)
                .map(|_| {
                    let v = if rng.random_bool(0.7) { truth } else { rng.random_range(1..=5) };
                    Some(f64::from(v))
                })
                .collect()
        })
        .collect()
}
