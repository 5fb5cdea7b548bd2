//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use livehost_core::catalogue::{serialize_for_prompt, RoutingId};
use livehost_core::datapipe::{dedup_pass, distribution_report, read_jsonl, DatasetInstance};
use livehost_core::dialogue::prompt::{CONTEXT_OPEN, INTENT_TAG};
use livehost_core::dialogue::{parse_response, render_response, CommentId, HostResponse, IntentLabel};
use livehost_core::evalkit::{
    correctness_rate, default_fixture_comments, krippendorff_alpha, replay_comments, run_ablation, standard_grid,
    AblationSetup, Level, RatingMatrix, ReplaySchedule,
};
use livehost_core::media::StubSynthesizer;
use livehost_core::rerank::{rerank, RecentHistory, RerankContext, RerankWeights};
use livehost_core::session::{audit_log, ReadyResponse, ResumePointer, SessionEvent, SessionStage};
use livehost_core::{
    Catalogue, DialogueConfig, Pipeline, Session, SessionConfig, SessionRunner, StubBackend, Synthesizer,
    ViewerComment,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn catalogue() -> Arc<Catalogue> {
    Arc::new(Catalogue::bundled())
}

fn fixture() -> Vec<DatasetInstance> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/dataset_60.jsonl");
    read_jsonl(BufReader::new(File::open(path).expect("fixture present"))).expect("fixture parses")
}

fn stub_backend(c: &Arc<Catalogue>, dialogue: &DialogueConfig) -> StubBackend {
    StubBackend::new(c.clone()).with_stock_openings(dialogue.rerank.stock_openings.clone())
}

fn state_machine_suite() -> Outcome {
    let c = catalogue();
    let started = Instant::now();
    let mut totals = common::LogStats::default();
    for seed in 0..10_000u64 {
        let s = common::run_random_schedule(seed, &c).map_err(|e| format!("schedule {seed}: {e}"))?;
        totals.interrupts += s.interrupts;
        totals.resumes += s.resumes;
        totals.wraps += s.wraps;
        totals.drops += s.drops;
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    ensure!(
        totals.interrupts > 0 && totals.resumes > 0 && totals.wraps > 0,
        "schedules did not exercise every transition: {totals:?}"
    );
    Ok(format!(
        "10000 schedules, 0 violations, {} interrupts, {} resumes, {} wraps, {} drops, {:.2?}",
        totals.interrupts, totals.resumes, totals.wraps, totals.drops, elapsed
    ))
}

fn resume_fidelity() -> Outcome {
    let c = catalogue();
    let (mut s, mut events) =
        Session::start(SessionConfig::default(), c.clone(), Arc::new(StubSynthesizer::default()), 0)
            .map_err(|e| e.to_string())?;
    let segment = |e: &SessionEvent| match e {
        SessionEvent::NarrationSegment { script_index, sentence_index, .. } => Some((*script_index, *sentence_index)),
        _ => None,
    };
    let mut start_of_2_3 = None;
    while start_of_2_3.is_none() {
        let deadline = s.next_deadline().ok_or("no deadline in idle narration")?;
        for r in s.tick(deadline) {
            if segment(&r.event) == Some((2, 3)) {
                start_of_2_3 = Some(r.at);
            }
            events.push(r);
        }
    }
    let t = start_of_2_3.unwrap() + 1;
    let comment = ViewerComment::new(CommentId(0), "主播有什么推荐的面霜吗", "viewer", t).unwrap();
    events.extend(s.on_comment(comment));
    ensure!(s.stage() == SessionStage::Interrupted, "stage {:?}", s.stage());
    ensure!(s.saved_pointer() == Some(ResumePointer::new(2, 4)), "saved {:?}", s.saved_pointer());
    let response = HostResponse::new("这款面霜很温和。", "今日直播间专属好价", "你是什么肤质呀？", "点击下方小黄车")
        .unwrap();
    events.extend(
        s.on_response_ready(
            ReadyResponse {
                response,
                product: Some(RoutingId(1007)),
                fallback: false,
            },
            t,
        )
        .map_err(|e| e.to_string())?,
    );
    let resumed = loop {
        let deadline = s.next_deadline().ok_or("no deadline after response")?;
        let batch = s.tick(deadline);
        let found = batch.iter().find_map(|r| segment(&r.event));
        events.extend(batch);
        if let Some(p) = found {
            break p;
        }
    };
    ensure!(resumed == (2, 4), "resumed at {resumed:?}");
    let violations = audit_log(&events, s.corpus_shape());
    ensure!(violations.is_empty(), "audit: {violations:?}");
    Ok("interrupted at (2,3), resumed at (2,4)".into())
}

fn dedup_oracle() -> Outcome {
    let corpus = common::planted_duplicate_corpus(200, 2024);
    let comments: Vec<String> = corpus.iter().map(|d| d.comment.clone()).collect();
    let started = Instant::now();
    let (kept, removed) = dedup_pass(&corpus, 0.7, 3);
    let oracle = common::brute_force_survivors(&comments, 0.7, 3);
    let elapsed = started.elapsed();
    ensure!(kept == oracle, "pipeline kept {} vs oracle {}", kept.len(), oracle.len());
    ensure!(!removed.is_empty(), "fixture planted no removable duplicates");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{} survivors, {} removed, sets equal, {elapsed:.2?}", kept.len(), removed.len()))
}

fn schema_suite() -> Outcome {
    let data = fixture();
    let mut checked = 0;
    for (i, d) in data.iter().enumerate() {
        let raw = render_response(&d.response);
        let parsed = parse_response(&raw).map_err(|e| format!("fixture {i} rejected: {e}"))?;
        ensure!(parsed == d.response, "fixture {i} did not round-trip");
        checked += 1;
        for len in [7usize, 13] {
            let slogan: String = d.response.slogan.chars().cycle().take(len).collect();
            let bad = raw.replace(&format!("SLOGAN: {}", d.response.slogan), &format!("SLOGAN: {slogan}"));
            ensure!(parse_response(&bad).is_err(), "{len}-char slogan accepted: {slogan}");
            checked += 1;
        }
        let spoken3 = "这款很温和。敏感肌也能用。今天有优惠！";
        let bad = raw.replace(&format!("SPOKEN: {}", d.response.spoken), &format!("SPOKEN: {spoken3}"));
        ensure!(parse_response(&bad).is_err(), "3-sentence spoken accepted in fixture {i}");
        checked += 1;
    }
    Ok(format!("{} valid fixtures parse, {checked} classifications correct", data.len()))
}

fn routing_id_leak() -> Outcome {
    let c = catalogue();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1eaf);
    for i in 0..1_000u64 {
        let sentinel = 700_000_001 + i * 7_919;
        let record = common::random_record(&mut rng, &c, sentinel);
        let text = serialize_for_prompt(&record, c.glossary());
        ensure!(!text.contains(&sentinel.to_string()), "sentinel {sentinel} leaked");
    }
    Ok("1000 records, 0 sentinel occurrences".into())
}

fn reranker_safety() -> Outcome {
    let c = catalogue();
    let dialogue = DialogueConfig::bundled();
    let weights = RerankWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    let history = RecentHistory::new();
    let mut dirty_batches = 0;
    for trial in 0..1_000usize {
        let active = &c.products()[trial % c.products().len()];
        let (batch, clean) = common::random_batch(&mut rng, &c, active, &dialogue.rerank.stock_openings);
        ensure!(clean.iter().any(|&b| b), "batch {trial} has no clean candidate");
        if clean.iter().any(|&b| !b) {
            dirty_batches += 1;
        }
        let ctx = RerankContext {
            comment: "主播推荐一下",
            active: Some(active),
            history: &history,
            catalogue: &c,
            stock_openings: &dialogue.rerank.stock_openings,
            ngram: dialogue.rerank.ngram,
        };
        let out = rerank(&batch, &ctx, &weights, false).map_err(|e| e.to_string())?;
        let winner = out.winner.index;
        ensure!(
            out.scores[winner].unsanctioned_penalty == 0.0 && clean[winner],
            "batch {trial}: winner {winner} carries an unsanctioned mention"
        );
    }
    Ok(format!("1000 batches ({dirty_batches} with unsanctioned candidates), 0 violations"))
}

fn stub_run(seed: u64) -> Result<(Vec<u8>, usize, Vec<usize>), String> {
    let c = catalogue();
    let dialogue = DialogueConfig::bundled();
    let pipeline = Arc::new(Pipeline::new(c.clone(), dialogue.clone(), Arc::new(stub_backend(&c, &dialogue))));
    let (session, events) = Session::start(SessionConfig::default(), c.clone(), Arc::new(StubSynthesizer::default()), 0)
        .map_err(|e| e.to_string())?;
    let runner = SessionRunner::new(session, pipeline, seed);
    let replay = replay_comments(runner, events, &default_fixture_comments(), ReplaySchedule::default());
    let mut bytes = Vec::new();
    for e in &replay.events {
        bytes.extend(serde_json::to_vec(e).map_err(|e| e.to_string())?);
        bytes.push(b'\n');
    }
    for t in &replay.turns {
        bytes.extend(serde_json::to_vec(t).map_err(|e| e.to_string())?);
        bytes.push(b'\n');
    }
    let counts = replay.turns.iter().map(|t| t.raw_candidates.len()).collect();
    Ok((bytes, replay.turns.len(), counts))
}

fn pipeline_determinism() -> Outcome {
    let (a, turns, counts) = stub_run(7)?;
    let (b, _, _) = stub_run(7)?;
    ensure!(turns == default_fixture_comments().len(), "{turns} turns");
    ensure!(counts.iter().all(|&n| n == 6), "candidate counts {counts:?}");
    ensure!(a == b, "runs differ");
    Ok(format!("{turns} turns x 6 candidates, {} bytes identical across runs", a.len()))
}

fn correctness_checker() -> Outcome {
    let c = catalogue();
    let dialogue = DialogueConfig::bundled();
    let pipeline = Pipeline::new(c.clone(), dialogue.clone(), Arc::new(stub_backend(&c, &dialogue)));
    let texts = [
        "主播有什么推荐的面霜吗",
        "防晒霜会不会很油",
        "洁面适合敏感肌吗",
        "精华怎么用",
        "这个真的有用吗？",
        "太好用了爱了",
        "乳液和面霜有什么区别",
        "油皮夏天用什么防晒",
        "神经酰胺是什么",
        "烟酰胺精华能天天用吗",
    ];
    let mut history = RecentHistory::new();
    let mut turns = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        let comment = ViewerComment::new(CommentId(i as u64), *t, "viewer", 0).unwrap();
        let turn = pipeline.respond(&comment, None, &mut history, Default::default(), 11 + i as u64);
        ensure!(!turn.fallback, "turn {i} fell back");
        turns.push(turn);
    }
    let pairs = |turns: &[livehost_core::TurnOutcome]| -> Vec<(HostResponse, Option<RoutingId>)> {
        turns.iter().map(|t| (t.response.clone(), t.active)).collect()
    };
    let rate = |items: &[(HostResponse, Option<RoutingId>)]| {
        correctness_rate(items.iter().map(|(r, a)| (r, a.and_then(|id| c.product(id)))), &c)
    };
    let clean = pairs(&turns);
    let full = rate(&clean).map_err(|e| e.to_string())?;
    ensure!(full == 1.0, "stub correctness {full}");
    let mut injected = clean.clone();
    let fabricated = c.lexicon().off_catalogue_ingredients.first().ok_or("no off-catalogue ingredient")?;
    let active = injected[9].1;
    injected[9] = (
        HostResponse::new(format!("这款加了{fabricated}，修护力满分。"), "今日直播间专属好价", "你是什么肤质呀？", "点击下方小黄车")
            .unwrap(),
        active,
    );
    let partial = rate(&injected).map_err(|e| e.to_string())?;
    ensure!((partial - 0.9).abs() < 1e-12, "injected correctness {partial}");
    Ok(format!("stub 1.0; 1 fabricated of 10 -> {partial}"))
}

fn alpha_checks() -> Outcome {
    let perfect = RatingMatrix::new(
        vec![
            vec![Some(1.0), Some(1.0), Some(1.0)],
            vec![Some(2.0), Some(2.0), Some(2.0)],
            vec![Some(4.0), Some(4.0), None],
            vec![Some(5.0), Some(5.0), Some(5.0)],
        ],
        Level::Nominal,
    )
    .map_err(|e| e.to_string())?;
    let p = krippendorff_alpha(&perfect).map_err(|e| e.to_string())?;
    ensure!(p.alpha == 1.0 && !p.degenerate, "perfect agreement gave {p:?}");

    // Items (1,1) (0,0) (1,0) (0,1): n = 8 values, four of each. Observed
    // disagreement: 4 mismatched ordered pairs / 8 = 0.5. Expected: 2·4·4 /
    // (8·7) = 4/7. alpha = 1 − 0.5 / (4/7) = 1/8.
    let hand = 1.0 - 0.5 / (4.0 / 7.0);
    let m = RatingMatrix::new(
        vec![
            vec![Some(1.0), Some(1.0)],
            vec![Some(0.0), Some(0.0)],
            vec![Some(1.0), Some(0.0)],
            vec![Some(0.0), Some(1.0)],
        ],
        Level::Nominal,
    )
    .map_err(|e| e.to_string())?;
    let got = krippendorff_alpha(&m).map_err(|e| e.to_string())?.alpha;
    ensure!((got - hand).abs() < 1e-9, "fixture alpha {got} vs hand {hand}");
    Ok(format!("perfect 1.0; fixture {got:.12} vs hand {hand:.12}"))
}

fn ablation_observables() -> Outcome {
    let c = catalogue();
    let dialogue = DialogueConfig::bundled();
    // Malformed outputs make "first valid" differ from "first generated".
    let backend = Arc::new(stub_backend(&c, &dialogue).with_malformed_rate(0.4));
    let setup = AblationSetup {
        catalogue: c.clone(),
        dialogue,
        backend,
        synthesizer: Arc::new(StubSynthesizer::default()) as Arc<dyn Synthesizer>,
        session: SessionConfig::default(),
        schedule: ReplaySchedule::default(),
        judge: None,
    };
    let runs = run_ablation(&standard_grid(), &default_fixture_comments(), &setup).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut skipped_first = 0;
    for run in &runs {
        let flags = run.row.flags;
        for t in &run.replay.turns {
            ensure!(t.flags == flags, "turn ran with {:?} under {:?}", t.flags, flags);
            if flags.pci_disabled {
                ensure!(!t.prompt.contains(CONTEXT_OPEN), "context block under pci_disabled");
            }
            if flags.tt_disabled {
                ensure!(!t.prompt.contains(INTENT_TAG), "intent tag under tt_disabled");
            } else {
                ensure!(t.prompt.matches(INTENT_TAG).count() == 1, "intent tag count");
            }
            if flags.rr_disabled && !t.valid_indices.is_empty() {
                ensure!(
                    t.selected_index == t.valid_indices.iter().min().copied(),
                    "rr_disabled selected {:?} with valid {:?}",
                    t.selected_index,
                    t.valid_indices
                );
                if t.valid_indices[0] > 0 {
                    skipped_first += 1;
                }
            }
            checked += 1;
        }
    }
    ensure!(skipped_first > 0, "no rr_disabled turn had an invalid first candidate");
    Ok(format!("{} variants, {checked} turns checked", runs.len()))
}

fn distribution_check() -> Outcome {
    let report = distribution_report(&fixture());
    let expected = [
        (IntentLabel::Inquiry, 0.4),
        (IntentLabel::Scepticism, 0.2),
        (IntentLabel::Appreciation, 0.2),
        (IntentLabel::Antagonism, 0.2),
    ];
    ensure!(report.total == 60, "total {}", report.total);
    for (label, p) in expected {
        let got = report.proportions[&label];
        ensure!(got == p, "{label:?} proportion {got}");
    }
    Ok(format!("{:?}", report.counts.values().collect::<Vec<_>>()))
}

fn percentile(sorted: &[Duration], q: f64) -> Duration {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

fn latency() -> Outcome {
    use support::{client, comment, create_session, start, stub_gateway, SseReader};

    const SAMPLES: usize = 20;
    let config = SessionConfig {
        hold_period_ms: 0,
        ..SessionConfig::default()
    };
    // Fast playback so each sample starts from idle narration.
    let synth = Arc::new(StubSynthesizer::new(400.0));

    let c = catalogue();
    let dialogue = DialogueConfig::bundled();
    let pipeline = Arc::new(Pipeline::new(c.clone(), dialogue.clone(), Arc::new(stub_backend(&c, &dialogue))));
    let (session, _) = Session::start(config.clone(), c.clone(), synth.clone(), 0).map_err(|e| e.to_string())?;
    let mut runner = SessionRunner::new(session, pipeline, 1);
    let mut local = Vec::new();
    let mut now = 0;
    for i in 0..SAMPLES {
        let comment = ViewerComment::new(CommentId(i as u64), "主播有什么推荐的面霜吗", "viewer", now).unwrap();
        let t0 = Instant::now();
        let out = runner.post_comment(comment);
        local.push(t0.elapsed());
        ensure!(
            out.events.iter().any(|e| matches!(e.event, SessionEvent::ResponseDelivery { .. })),
            "in-process response not delivered"
        );
        now += 60_000;
        runner.advance(now);
    }

    let (srv, _gw) = start(stub_gateway(config, synth));
    let http = client();
    let base = srv.url();
    let sid = create_session(&http, &base);
    let mut sse = SseReader::open(&http, &base, &sid, None, None);
    sse.until(|e| matches!(e.event, SessionEvent::NarrationSegment { .. }));
    let mut remote = Vec::new();
    for i in 0..SAMPLES {
        let t0 = Instant::now();
        let ack = comment(&http, &base, &sid, "主播有什么推荐的面霜吗");
        sse.until(|e| matches!(&e.event, SessionEvent::ResponseDelivery { comment_id, .. } if *comment_id == ack.comment_id));
        remote.push(t0.elapsed());
        ensure!(ack.comment_id == CommentId(i as u64), "ack {:?}", ack.comment_id);
        sse.until(|e| {
            matches!(e.event, SessionEvent::StageChange { to: SessionStage::IdleNarration, .. })
        });
    }
    drop(sse);
    local.sort();
    remote.sort();
    let worst = *remote.last().unwrap();
    ensure!(worst < Duration::from_millis(200), "worst gateway latency {worst:?}");
    Ok(format!(
        "gateway p50 {:.2?} max {:.2?}; in-process p50 {:.2?} max {:.2?}",
        percentile(&remote, 0.5),
        worst,
        percentile(&local, 0.5),
        local.last().unwrap()
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("state-machine suite", state_machine_suite),
        ("resume fidelity", resume_fidelity),
        ("dedup oracle", dedup_oracle),
        ("schema suite", schema_suite),
        ("routing-id leak", routing_id_leak),
        ("reranker safety", reranker_safety),
        ("pipeline determinism and counts", pipeline_determinism),
        ("correctness checker", correctness_checker),
        ("krippendorff alpha", alpha_checks),
        ("ablation observables", ablation_observables),
        ("distribution check", distribution_check),
        ("latency", latency),
    ];
    // Panics are reported as failures; keep their default message quiet.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
