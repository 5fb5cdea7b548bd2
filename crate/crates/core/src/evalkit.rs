//! Evaluation: claim-based correctness, Krippendorff's alpha, rubric judging
//! through a generation backend, and the ablation runner.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{Catalogue, ProductRecord};
use crate::config::{DialogueConfig, JudgeRubrics};
use crate::dialogue::{
    render_response, validate_claims, AblationFlags, BackendError, BackendRequest, CommentId,
    GenerationBackend, HostResponse, Millis, SamplingParams, ViewerComment,
};
use crate::media::Synthesizer;
use crate::pipeline::{Pipeline, TurnOutcome};
use crate::runner::SessionRunner;
use crate::session::{EventRecord, Session, SessionConfig, SessionError, SessionStage};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot compute a rate over an empty response set")]
    EmptySet,
    #[error("rating matrix needs at least {0}")]
    MatrixShape(&'static str),
    #[error("no item has two or more ratings")]
    NoPairableValues,
    #[error("rating file: {0}")]
    Parse(String),
    #[error("judge output unparseable: {0}")]
    JudgeParse(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Fraction of responses with no claim violation against their active
/// product.
pub fn correctness_rate<'a>(
    items: impl IntoIterator<Item = (&'a HostResponse, Option<&'a ProductRecord>)>,
    catalogue: &Catalogue,
) -> Result<f64, EvalError> {
    let mut total = 0usize;
    let mut clean = 0usize;
    for (resp, active) in items {
        total += 1;
        if validate_claims(resp, active, catalogue).is_empty() {
            clean += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::EmptySet);
    }
    Ok(clean as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    Interval,
}

impl Level {
    fn delta2(self, a: f64, b: f64) -> f64 {
        match self {
            Level::Nominal => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            Level::Interval => (a - b) * (a - b),
        }
    }
}

/// Items × annotators; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    ratings: Vec<Vec<Option<f64>>>,
    annotators: usize,
    pub level: Level,
}

impl RatingMatrix {
    pub fn new(ratings: Vec<Vec<Option<f64>>>, level: Level) -> Result<Self, EvalError> {
        if ratings.is_empty() {
            return Err(EvalError::MatrixShape("one item"));
        }
        let annotators = ratings[0].len();
        if annotators < 2 {
            return Err(EvalError::MatrixShape("two annotators"));
        }
        if ratings.iter().any(|r| r.len() != annotators) {
            return Err(EvalError::MatrixShape("the same annotator count on every item"));
        }
        Ok(Self {
            ratings,
            annotators,
            level,
        })
    }

    /// Reads CSV with a header row; the first column is the item label and
    /// each further column one annotator. Empty cells are missing ratings.
    pub fn from_csv(reader: impl Read, level: Level) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EvalError::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| EvalError::Parse(format!("not a number: {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(rows, level)
    }

    pub fn items(&self) -> usize {
        self.ratings.len()
    }

    pub fn annotators(&self) -> usize {
        self.annotators
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.ratings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    /// Set when expected disagreement is zero (a single value throughout);
    /// alpha is then reported as 1.0.
    pub degenerate: bool,
    /// Number of pairable values.
    pub n: usize,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Value(f64);

impl Eq for Value {}
impl Ord for Value {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Krippendorff's alpha from the coincidence matrix. Items with fewer than
/// two ratings are ignored.
pub fn krippendorff_alpha(m: &RatingMatrix) -> Result<AlphaResult, EvalError> {
    let mut coincidence: BTreeMap<(Value, Value), f64> = BTreeMap::new();
    for row in &m.ratings {
        let values: Vec<f64> = row.iter().flatten().copied().collect();
        let mu = values.len();
        if mu < 2 {
            continue;
        }
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry((Value(a), Value(b))).or_default() += 1.0 / (mu - 1) as f64;
                }
            }
        }
    }
    let mut marginals: BTreeMap<Value, f64> = BTreeMap::new();
    for (&(c, _), &o) in &coincidence {
        *marginals.entry(c).or_default() += o;
    }
    let n: f64 = marginals.values().sum();
    if n < 2.0 {
        return Err(EvalError::NoPairableValues);
    }
    let observed: f64 = coincidence
        .iter()
        .map(|(&(c, k), &o)| o * m.level.delta2(c.0, k.0))
        .sum();
    let mut expected = 0.0;
    for (&c, &nc) in &marginals {
        for (&k, &nk) in &marginals {
            expected += nc * nk * m.level.delta2(c.0, k.0);
        }
    }
    let n_count = n.round() as usize;
    if expected == 0.0 {
        return Ok(AlphaResult {
            alpha: 1.0,
            degenerate: true,
            n: n_count,
        });
    }
    Ok(AlphaResult {
        alpha: 1.0 - (n - 1.0) * observed / expected,
        degenerate: false,
        n: n_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JudgeDimension {
    Creativity,
    Engagement,
}

impl JudgeDimension {
    pub const ALL: [JudgeDimension; 2] = [JudgeDimension::Creativity, JudgeDimension::Engagement];

    fn rubric(self, r: &JudgeRubrics) -> &str {
        match self {
            JudgeDimension::Creativity => &r.creativity,
            JudgeDimension::Engagement => &r.engagement,
        }
    }
}

impl fmt::Display for JudgeDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JudgeDimension::Creativity => "creativity",
            JudgeDimension::Engagement => "engagement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub dimension: JudgeDimension,
    pub score: u8,
    pub rationale: String,
}

pub fn judge_prompt(resp: &HostResponse, dimension: JudgeDimension, rubrics: &JudgeRubrics) -> String {
    dimension.rubric(rubrics).replace("{response}", &render_response(resp))
}

fn labeled<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        let rest = line.trim().strip_prefix(label)?;
        rest.strip_prefix(':')
            .or_else(|| rest.strip_prefix('：'))
            .map(str::trim)
    })
}

/// Parses `SCORE: <1-5>` and `RATIONALE: <text>` lines.
pub fn parse_judge_output(text: &str, dimension: JudgeDimension) -> Result<JudgeScore, EvalError> {
    let raw = labeled(text, "SCORE").ok_or_else(|| EvalError::JudgeParse("missing SCORE".into()))?;
    let score: u8 = raw
        .parse()
        .map_err(|_| EvalError::JudgeParse(format!("SCORE is not an integer: {raw:?}")))?;
    if !(1..=5).contains(&score) {
        return Err(EvalError::JudgeParse(format!("SCORE {score} outside 1-5")));
    }
    let rationale = labeled(text, "RATIONALE")
        .filter(|r| !r.is_empty())
        .ok_or_else(|| EvalError::JudgeParse("missing RATIONALE".into()))?;
    Ok(JudgeScore {
        dimension,
        score,
        rationale: rationale.to_string(),
    })
}

pub fn judge(
    resp: &HostResponse,
    dimension: JudgeDimension,
    backend: &dyn GenerationBackend,
    rubrics: &JudgeRubrics,
    seed: u64,
) -> Result<JudgeScore, EvalError> {
    let sampling = SamplingParams::default();
    let req = BackendRequest {
        prompt: judge_prompt(resp, dimension, rubrics),
        n: 1,
        temperature: sampling.temperature,
        top_p: sampling.top_p,
        repetition_penalty: sampling.repetition_penalty,
        seed,
    };
    let out = backend.generate(&req)?;
    let first = out
        .first()
        .ok_or_else(|| EvalError::JudgeParse("backend returned no output".into()))?;
    parse_judge_output(first, dimension)
}

/// The four standard variants: all components on, then each one removed.
pub fn standard_grid() -> Vec<AblationFlags> {
    vec![
        AblationFlags::BASELINE,
        AblationFlags {
            tt_disabled: true,
            ..Default::default()
        },
        AblationFlags {
            pci_disabled: true,
            ..Default::default()
        },
        AblationFlags {
            rr_disabled: true,
            ..Default::default()
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySchedule {
    /// Gap between the session returning to idle narration and the next
    /// comment.
    pub spacing_ms: Millis,
    pub seed: u64,
}

impl Default for ReplaySchedule {
    fn default() -> Self {
        Self {
            spacing_ms: 1_500,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRun {
    pub events: Vec<EventRecord>,
    pub turns: Vec<TurnOutcome>,
}

/// Posts each comment once the session is back in idle narration, then lets
/// it settle. Deterministic for a fixed schedule.
pub fn replay_comments(
    mut runner: SessionRunner,
    mut events: Vec<EventRecord>,
    comments: &[String],
    schedule: ReplaySchedule,
) -> ReplayRun {
    let mut turns = Vec::new();
    for (i, text) in comments.iter().enumerate() {
        while runner.session().stage() != SessionStage::IdleNarration {
            let deadline = runner
                .session()
                .next_deadline()
                .expect("busy session has a deadline");
            let step = runner.advance(deadline);
            events.extend(step.events);
            turns.extend(step.turns);
        }
        let at = runner.session().now() + schedule.spacing_ms;
        let step = runner.advance(at);
        events.extend(step.events);
        turns.extend(step.turns);
        let Ok(comment) = ViewerComment::new(CommentId(i as u64), text.clone(), "evalkit", at) else {
            continue;
        };
        let step = runner.post_comment(comment);
        events.extend(step.events);
        turns.extend(step.turns);
    }
    while runner.session().stage() != SessionStage::IdleNarration {
        let deadline = runner
            .session()
            .next_deadline()
            .expect("busy session has a deadline");
        let step = runner.advance(deadline);
        events.extend(step.events);
        turns.extend(step.turns);
    }
    ReplayRun { events, turns }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub flags: AblationFlags,
    pub turns: usize,
    pub correctness: f64,
    pub fallbacks: usize,
    /// Turns whose prompt carries the product context block.
    pub prompts_with_context: usize,
    /// Turns whose prompt carries the intent tag line.
    pub prompts_with_intent_tag: usize,
    /// Turns where the lowest-index valid candidate was selected.
    pub first_valid_selected: usize,
    pub mean_creativity: Option<f64>,
    pub mean_engagement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRun {
    pub row: AblationRow,
    pub replay: ReplayRun,
}

/// Everything a variant run needs besides its flags.
pub struct AblationSetup {
    pub catalogue: Arc<Catalogue>,
    pub dialogue: DialogueConfig,
    pub backend: Arc<dyn GenerationBackend>,
    pub synthesizer: Arc<dyn Synthesizer>,
    pub session: SessionConfig,
    pub schedule: ReplaySchedule,
    pub judge: Option<Arc<dyn GenerationBackend>>,
}

/// Runs the full session pipeline over the fixture comments once per variant.
pub fn run_ablation(
    grid: &[AblationFlags],
    comments: &[String],
    setup: &AblationSetup,
) -> Result<Vec<AblationRun>, EvalError> {
    use crate::dialogue::prompt::{CONTEXT_OPEN, INTENT_TAG};

    let pipeline = Arc::new(Pipeline::new(
        setup.catalogue.clone(),
        setup.dialogue.clone(),
        setup.backend.clone(),
    ));
    let mut out = Vec::with_capacity(grid.len());
    for &flags in grid {
        let config = SessionConfig {
            ablation: flags,
            ..setup.session
        };
        let (session, events) = Session::start(
            config,
            setup.catalogue.clone(),
            setup.synthesizer.clone(),
            0,
        )?;
        let runner = SessionRunner::new(session, pipeline.clone(), setup.schedule.seed);
        let replay = replay_comments(runner, events, comments, setup.schedule);
        let turns = &replay.turns;
        let correctness = if turns.is_empty() {
            1.0
        } else {
            correctness_rate(
                turns
                    .iter()
                    .map(|t| (&t.response, t.active.and_then(|id| setup.catalogue.product(id)))),
                &setup.catalogue,
            )?
        };
        let (mean_creativity, mean_engagement) = match &setup.judge {
            Some(j) if !turns.is_empty() => {
                let mut sums = [0.0; 2];
                for (i, t) in turns.iter().enumerate() {
                    for (d, dim) in JudgeDimension::ALL.iter().enumerate() {
                        let s = judge(&t.response, *dim, &**j, &setup.dialogue.judge, i as u64)?;
                        sums[d] += f64::from(s.score);
                    }
                }
                let k = turns.len() as f64;
                (Some(sums[0] / k), Some(sums[1] / k))
            }
            _ => (None, None),
        };
        let row = AblationRow {
            variant: flags.name(),
            flags,
            turns: turns.len(),
            correctness,
            fallbacks: turns.iter().filter(|t| t.fallback).count(),
            prompts_with_context: turns.iter().filter(|t| t.prompt.contains(CONTEXT_OPEN)).count(),
            prompts_with_intent_tag: turns.iter().filter(|t| t.prompt.contains(INTENT_TAG)).count(),
            first_valid_selected: turns
                .iter()
                .filter(|t| t.selected_index.is_some() && t.selected_index == t.valid_indices.first().copied())
                .count(),
            mean_creativity,
            mean_engagement,
        };
        out.push(AblationRun { row, replay });
    }
    Ok(out)
}

/// Fixture comments used by the ablation runner when none are supplied.
pub fn default_fixture_comments() -> Vec<String> {
    [
        "主播有什么推荐的面霜吗",
        "油皮适合用哪款洁面",
        "防晒霜真的有用吗，是不是智商税",
        "这个精华太好用了，已经回购了",
        "又是割韭菜的直播间",
        "敏感肌能用烟酰胺精华吗",
        "喷雾防晒可以补涂吗",
        "你好",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
