//! Independent oracles and generators shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;

use livehost_core::catalogue::{Category, Ingredient, ProductRecord, RoutingId};
use livehost_core::datapipe::{DatasetInstance, Source};
use livehost_core::dialogue::{CommentId, HostResponse, IntentLabel, ViewerComment};
use livehost_core::media::StubSynthesizer;
use livehost_core::rerank::Candidate;
use livehost_core::session::{
    EventRecord, LeaseHolder, ReadyResponse, Session, SessionConfig, SessionEvent, SessionStage,
};
use livehost_core::Catalogue;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ------------------------------------------------------------------ dedup

fn oracle_grams(text: &str, n: usize) -> HashSet<Vec<char>> {
    let folded = text.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    if chars.len() < n {
        return HashSet::new();
    }
    (0..=chars.len() - n).map(|i| chars[i..i + n].to_vec()).collect()
}

pub fn oracle_jaccard(a: &str, b: &str, n: usize) -> f64 {
    let (ga, gb) = (oracle_grams(a, n), oracle_grams(b, n));
    if ga.is_empty() && gb.is_empty() {
        return 1.0;
    }
    let union = ga.union(&gb).count();
    ga.intersection(&gb).count() as f64 / union as f64
}

/// Full similarity matrix, then the in-order keep rule: an instance survives
/// unless an earlier survivor is above the threshold or has an identical
/// gram set.
pub fn brute_force_survivors(comments: &[String], threshold: f64, n: usize) -> Vec<usize> {
    let m = comments.len();
    let mut sim = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            sim[i][j] = oracle_jaccard(&comments[i], &comments[j], n);
        }
    }
    let mut alive = vec![true; m];
    for j in 0..m {
        for i in 0..j {
            if alive[i] && (sim[i][j] > threshold || sim[i][j] == 1.0) {
                alive[j] = false;
                break;
            }
        }
    }
    (0..m).filter(|&i| alive[i]).collect()
}

const HAN: &str = "面霜精华防晒洁面乳液保湿修护敏感肌油皮干皮推荐适合吗怎么用效果成分温和清爽滋润质地价格活动主播直播间姐妹宝贝真的好喜欢回购试试看皮肤屏障换季";

pub fn dataset_instance(comment: String, intent: IntentLabel) -> DatasetInstance {
    DatasetInstance {
        system_prompt: "persona".into(),
        response: HostResponse {
            spoken: format!("{comment}。"),
            slogan: "今日直播间专属好价".into(),
            hook_question: "你是什么肤质呀？".into(),
            cta: "点击下方小黄车".into(),
        },
        comment,
        intent,
        source: Source::Real,
        pair_id: "p".into(),
        naturalness: None,
    }
}

/// Random comments where roughly a third are light edits of an earlier one,
/// so similarities straddle the threshold.
pub fn planted_duplicate_corpus(size: usize, seed: u64) -> Vec<DatasetInstance> {
    let alphabet: Vec<char> = HAN.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comments: Vec<String> = Vec::with_capacity(size);
    for _ in 0..size {
        let text = if !comments.is_empty() && rng.random_bool(0.35) {
            let base: Vec<char> = comments.choose(&mut rng).unwrap().chars().collect();
            let mut chars = base.clone();
            for _ in 0..rng.random_range(0..=3) {
                let pos = rng.random_range(0..chars.len());
                match rng.random_range(0..3) {
                    0 => chars[pos] = *alphabet.choose(&mut rng).unwrap(),
                    1 => chars.insert(pos, *alphabet.choose(&mut rng).unwrap()),
                    _ if chars.len() > 4 => {
                        chars.remove(pos);
                    }
                    _ => {}
                }
            }
            if rng.random_bool(0.2) {
                chars.push('？');
            }
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
        .map(|(i, c)| dataset_instance(c, IntentLabel::ALL[i % 4]))
        .collect()
}

// ------------------------------------------------------------- catalogue

const NON_DIGIT: &str = "abcdefghijklmnopqrstuvwxyz温和清爽滋润质地肌肤屏障保湿修护一款好用推荐";

fn word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let alphabet: Vec<char> = NON_DIGIT.chars().collect();
    let len = rng.random_range(min..=max);
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// A structurally valid record with digit-free field values and the given
/// routing id.
pub fn random_record(rng: &mut ChaCha8Rng, catalogue: &Catalogue, routing_id: u64) -> ProductRecord {
    let glossary = catalogue.glossary().entries();
    let k = rng.random_range(1..=4);
    let ingredients = glossary
        .choose_multiple(rng, k)
        .map(|e| Ingredient {
            name: e.ingredient.clone(),
            role: word(rng, 2, 6),
        })
        .collect();
    ProductRecord {
        routing_id: RoutingId(routing_id),
        name: word(rng, 3, 10),
        category: *Category::ALL.choose(rng).unwrap(),
        ingredients,
        texture: word(rng, 2, 8),
        skin_types: (0..rng.random_range(1..4)).map(|_| word(rng, 2, 4)).collect(),
        usage: word(rng, 5, 20),
        talking_points: (0..rng.random_range(1..4)).map(|_| word(rng, 5, 20)).collect(),
        disclaimer: word(rng, 5, 15),
    }
}

// ---------------------------------------------------------------- rerank

/// A batch with at least one candidate free of unsanctioned mentions. Returns
/// the batch and which candidates were built clean.
pub fn random_batch(
    rng: &mut ChaCha8Rng,
    catalogue: &Catalogue,
    active: &ProductRecord,
    stock: &[String],
) -> (Vec<Candidate>, Vec<bool>) {
    let others: Vec<&ProductRecord> = catalogue
        .products()
        .iter()
        .filter(|p| p.routing_id != active.routing_id)
        .collect();
    let off: Vec<String> = catalogue.lexicon().off_catalogue_products.clone();
    let size = rng.random_range(1..=8);
    let clean_slot = rng.random_range(0..size);
    let mut batch = Vec::with_capacity(size);
    let mut clean = Vec::with_capacity(size);
    for index in 0..size {
        let is_clean = index == clean_slot || rng.random_bool(0.3);
        let mut parts: Vec<String> = Vec::new();
        if rng.random_bool(0.3) {
            parts.push(stock.choose(rng).unwrap().clone());
        }
        if rng.random_bool(0.6) {
            parts.push(active.name.clone());
        }
        parts.push(active.talking_points.choose(rng).unwrap().clone());
        if !is_clean {
            let mentions = rng.random_range(1..=3);
            for _ in 0..mentions {
                if rng.random_bool(0.7) {
                    parts.push(format!("{}也不错", others.choose(rng).unwrap().name));
                } else {
                    parts.push(format!("比{}好用", off.choose(rng).unwrap()));
                }
            }
        }
        if rng.random_bool(0.3) {
            let last = parts.last().unwrap().clone();
            parts.push(last);
        }
        let spoken = format!("{}。", parts.join("，"));
        let response = HostResponse::new(spoken, "今日直播间专属好价", "你是什么肤质呀？", "点击下方小黄车")
            .expect("generated response is schema-valid");
        batch.push(Candidate {
            raw: livehost_core::dialogue::render_response(&response),
            response,
            index,
        });
        clean.push(is_clean);
    }
    (batch, clean)
}

// --------------------------------------------------------------- session

fn legal(from: SessionStage, to: SessionStage) -> bool {
    use SessionStage::*;
    matches!(
        (from, to),
        (Init, IdleNarration)
            | (IdleNarration, Interrupted)
            | (Interrupted, Responding)
            | (Responding, Hold)
            | (Hold, IdleNarration)
            | (Hold, Interrupted)
    )
}

fn successor(lengths: &[usize], p: (usize, usize)) -> (usize, usize) {
    if p.1 + 1 < lengths[p.0] {
        (p.0, p.1 + 1)
    } else if p.0 + 1 < lengths.len() {
        (p.0 + 1, 0)
    } else {
        (0, 0)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LogStats {
    pub interrupts: usize,
    pub resumes: usize,
    pub wraps: usize,
    pub drops: usize,
}

/// Replays a log against the state-machine rules. Returns violations as text.
pub fn check_log(events: &[EventRecord], lengths: &[usize]) -> (Vec<String>, LogStats) {
    let mut v = Vec::new();
    let mut stats = LogStats::default();
    let mut stage = SessionStage::Init;
    let mut last_played: Option<(usize, usize)> = None;
    let mut expected_resume: Option<(usize, usize)> = None;
    let mut resuming = false;
    for (i, rec) in events.iter().enumerate() {
        match &rec.event {
            SessionEvent::StageChange { from, to, .. } => {
                if *from != stage {
                    v.push(format!("#{i}: change from {from:?} while in {stage:?}"));
                }
                if !legal(*from, *to) {
                    v.push(format!("#{i}: illegal edge {from:?} -> {to:?}"));
                }
                if (*from, *to) == (SessionStage::IdleNarration, SessionStage::Interrupted) {
                    stats.interrupts += 1;
                    expected_resume = last_played.map(|p| successor(lengths, p));
                }
                if (*from, *to) == (SessionStage::Hold, SessionStage::IdleNarration) {
                    resuming = true;
                }
                stage = *to;
            }
            SessionEvent::NarrationSegment {
                script_index,
                sentence_index,
                ..
            } => {
                let p = (*script_index, *sentence_index);
                if stage != SessionStage::IdleNarration {
                    v.push(format!("#{i}: narration while {stage:?}"));
                }
                if resuming {
                    stats.resumes += 1;
                    if Some(p) != expected_resume {
                        v.push(format!("#{i}: resumed at {p:?}, expected {expected_resume:?}"));
                    }
                    resuming = false;
                } else {
                    let expected = last_played.map_or((0, 0), |q| successor(lengths, q));
                    if p != expected {
                        v.push(format!("#{i}: narration {p:?}, expected {expected:?}"));
                    }
                }
                if p == (0, 0) && last_played.is_some() {
                    stats.wraps += 1;
                }
                last_played = Some(p);
            }
            SessionEvent::ResponseDelivery { .. } => {
                if stage != SessionStage::Responding {
                    v.push(format!("#{i}: response while {stage:?}"));
                }
            }
            SessionEvent::CommentDropped { .. } => stats.drops += 1,
            _ => {}
        }
    }
    (v, stats)
}

fn lease_ok(s: &Session) -> Result<(), String> {
    let holder = s.lease().holder;
    let expected = match s.stage() {
        SessionStage::IdleNarration => LeaseHolder::IdleChannel,
        SessionStage::Interrupted | SessionStage::Responding | SessionStage::Hold => {
            LeaseHolder::InteractiveChannel
        }
        SessionStage::Init => LeaseHolder::None,
    };
    if holder == expected {
        Ok(())
    } else {
        Err(format!("lease {holder:?} in stage {:?}", s.stage()))
    }
}

fn canned_responses() -> Vec<HostResponse> {
    [
        "这款面霜很温和。",
        "防晒要涂够量，出门前十五分钟涂好。",
        "谢谢喜欢，用完记得回购哦。",
        "别生气，我们直播间价格公开透明，可以慢慢比较。",
    ]
    .iter()
    .map(|s| HostResponse::new(*s, "今日直播间专属好价", "你是什么肤质呀？", "点击下方小黄车").unwrap())
    .collect()
}

/// Drives one randomized comment/tick schedule directly against the session
/// and checks every invariant. Returns the log statistics on success.
pub fn run_random_schedule(seed: u64, catalogue: &Arc<Catalogue>) -> Result<LogStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SessionConfig {
        hold_period_ms: rng.random_range(0..=3_000),
        comment_queue_capacity: rng.random_range(1..=8),
        ..SessionConfig::default()
    };
    let lengths: Vec<usize> = catalogue.scripts().iter().map(|s| s.sentences.len()).collect();
    let responses = canned_responses();
    let (mut s, mut log) = Session::start(
        config,
        catalogue.clone(),
        Arc::new(StubSynthesizer::default()),
        0,
    )
    .map_err(|e| e.to_string())?;
    let mut next_id = 0u64;
    let mut now = 0u64;
    if rng.random_bool(0.2) {
        now += rng.random_range(400_000..800_000);
        log.extend(s.tick(now));
    }
    let ops = rng.random_range(5..40);
    for _ in 0..ops {
        if rng.random_bool(0.5) {
            now += rng.random_range(0..8_000);
            let c = ViewerComment::new(CommentId(next_id), "主播有什么推荐的面霜吗", "viewer", now)
                .unwrap();
            next_id += 1;
            log.extend(s.on_comment(c));
        } else {
            now += rng.random_range(0..12_000);
            log.extend(s.tick(now));
        }
        lease_ok(&s)?;
        if s.awaiting_response().is_some() {
            now = now.max(s.now()) + rng.random_range(0..400);
            let ready = ReadyResponse {
                response: responses.choose(&mut rng).unwrap().clone(),
                product: Some(catalogue.products().choose(&mut rng).unwrap().routing_id),
                fallback: false,
            };
            log.extend(s.on_response_ready(ready, now).map_err(|e| e.to_string())?);
            lease_ok(&s)?;
        }
    }
    // Liveness: the backlog drains within a bounded number of steps.
    let bound = 4 * (config.comment_queue_capacity + 2);
    let mut steps = 0;
    while s.stage() != SessionStage::IdleNarration {
        steps += 1;
        if steps > bound {
            return Err(format!("seed {seed}: no return to idle after {bound} steps"));
        }
        if s.awaiting_response().is_some() {
            let ready = ReadyResponse {
                response: responses[0].clone(),
                product: None,
                fallback: false,
            };
            log.extend(s.on_response_ready(ready, s.now()).map_err(|e| e.to_string())?);
        } else {
            let deadline = s.next_deadline().ok_or("busy session without a deadline")?;
            log.extend(s.tick(deadline));
        }
        lease_ok(&s)?;
    }
    // One more segment so a pending resume is observed.
    if let Some(deadline) = s.next_deadline() {
        log.extend(s.tick(deadline));
    }
    let (violations, stats) = check_log(&log, &lengths);
    if violations.is_empty() {
        Ok(stats)
    } else {
        Err(format!("seed {seed}: {}", violations.join("; ")))
    }
}
