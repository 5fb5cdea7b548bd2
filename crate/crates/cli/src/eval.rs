//! `evalkit correctness | alpha | ablate`.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use livehost_core::catalogue::RoutingId;
use livehost_core::dialogue::{validate_claims, AblationFlags};
use livehost_core::evalkit::{
    correctness_rate, default_fixture_comments, krippendorff_alpha, run_ablation, standard_grid, AblationRow,
    AblationRun, AblationSetup, AlphaResult, Level, RatingMatrix, ReplaySchedule,
};
use livehost_core::media::StubSynthesizer;
use livehost_core::{
    Catalogue, DialogueConfig, GenerationBackend, HostResponse, SessionConfig, StubBackend,
};
use serde::{Deserialize, Serialize};

/// One line of a correctness input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedResponse {
    pub response: HostResponse,
    /// Product the response should be grounded on.
    #[serde(default)]
    pub routing_id: Option<RoutingId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectnessRow {
    pub responses: usize,
    pub clean: usize,
    pub correctness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub detail: String,
}

pub fn correctness(items: &[GradedResponse], catalogue: &Catalogue) -> anyhow::Result<(CorrectnessRow, Vec<Violation>)> {
    let rate = correctness_rate(
        items.iter().map(|g| (&g.response, g.routing_id.and_then(|id| catalogue.product(id)))),
        catalogue,
    )?;
    let mut violations = Vec::new();
    for (i, g) in items.iter().enumerate() {
        for v in validate_claims(&g.response, g.routing_id.and_then(|id| catalogue.product(id)), catalogue) {
            violations.push(Violation {
                line: i + 1,
                detail: format!("{v:?}"),
            });
        }
    }
    let clean = items.len() - violations.iter().map(|v| v.line).collect::<std::collections::BTreeSet<_>>().len();
    Ok((
        CorrectnessRow {
            responses: items.len(),
            clean,
            correctness: rate,
        },
        violations,
    ))
}

pub fn read_graded(path: &Path) -> anyhow::Result<Vec<GradedResponse>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in crate::open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub items: usize,
    pub annotators: usize,
    pub pairable_values: usize,
    pub alpha: f64,
    pub degenerate: bool,
}

pub fn alpha(path: &Path, level: Level) -> anyhow::Result<AlphaRow> {
    let m = RatingMatrix::from_csv(crate::open(path)?, level)?;
    let AlphaResult { alpha, degenerate, n } = krippendorff_alpha(&m)?;
    Ok(AlphaRow {
        items: m.items(),
        annotators: m.annotators(),
        pairable_values: n,
        alpha,
        degenerate,
    })
}

/// Ablation grid file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub seed: Option<u64>,
    pub spacing_ms: Option<u64>,
    /// Comments replayed per variant; defaults to the built-in fixture.
    pub comments: Option<Vec<String>>,
    pub variant: Vec<AblationFlags>,
}

impl GridConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Flat ablation row for tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTableRow {
    pub variant: String,
    pub tt_disabled: bool,
    pub pci_disabled: bool,
    pub rr_disabled: bool,
    pub turns: usize,
    pub correctness: f64,
    pub fallbacks: usize,
    pub prompts_with_context: usize,
    pub prompts_with_intent_tag: usize,
    pub first_valid_selected: usize,
    pub mean_creativity: Option<f64>,
    pub mean_engagement: Option<f64>,
}

impl From<&AblationRow> for AblationTableRow {
    fn from(r: &AblationRow) -> Self {
        Self {
            variant: r.variant.clone(),
            tt_disabled: r.flags.tt_disabled,
            pci_disabled: r.flags.pci_disabled,
            rr_disabled: r.flags.rr_disabled,
            turns: r.turns,
            correctness: r.correctness,
            fallbacks: r.fallbacks,
            prompts_with_context: r.prompts_with_context,
            prompts_with_intent_tag: r.prompts_with_intent_tag,
            first_valid_selected: r.first_valid_selected,
            mean_creativity: r.mean_creativity,
            mean_engagement: r.mean_engagement,
        }
    }
}

pub struct AblateOptions {
    pub grid: GridConfig,
    pub catalogue: Arc<Catalogue>,
    pub dialogue: DialogueConfig,
    /// Generation backend; the catalogue stub when unset.
    pub backend: Option<Arc<dyn GenerationBackend>>,
    pub judge: Option<Arc<dyn GenerationBackend>>,
}

fn run_grid(opts: AblateOptions) -> anyhow::Result<Vec<AblationRun>> {
    let grid = if opts.grid.variant.is_empty() {
        standard_grid()
    } else {
        opts.grid.variant.clone()
    };
    let comments = opts.grid.comments.clone().unwrap_or_else(default_fixture_comments);
    if comments.is_empty() {
        bail!("ablation needs at least one comment");
    }
    let defaults = ReplaySchedule::default();
    let backend = opts.backend.unwrap_or_else(|| {
        Arc::new(
            StubBackend::new(opts.catalogue.clone())
                .with_stock_openings(opts.dialogue.rerank.stock_openings.clone()),
        )
    });
    let setup = AblationSetup {
        catalogue: opts.catalogue,
        dialogue: opts.dialogue,
        backend,
        synthesizer: Arc::new(StubSynthesizer::default()),
        session: SessionConfig::default(),
        schedule: ReplaySchedule {
            spacing_ms: opts.grid.spacing_ms.unwrap_or(defaults.spacing_ms),
            seed: opts.grid.seed.unwrap_or(defaults.seed),
        },
        judge: opts.judge,
    };
    Ok(run_ablation(&grid, &comments, &setup)?)
}

pub fn ablate(opts: AblateOptions) -> anyhow::Result<Vec<AblationTableRow>> {
    Ok(run_grid(opts)?.iter().map(|r| AblationTableRow::from(&r.row)).collect())
}

/// Responses of every turn in the grid runs, with their grounding product.
pub fn baseline_responses(opts: AblateOptions) -> anyhow::Result<Vec<GradedResponse>> {
    Ok(run_grid(opts)?
        .into_iter()
        .flat_map(|r| r.replay.turns)
        .map(|t| GradedResponse {
            response: t.response,
            routing_id: t.active,
        })
        .collect())
}
