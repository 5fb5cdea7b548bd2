//! Dataset cleaning: near-duplicate removal, PII scrubbing, structural
//! validation and a comment/response coherence filter, plus the intent
//! distribution report.
//!
//! Instances are line-delimited JSON. Passes run in a fixed order
//! (dedup, pii, structure, coherence) and every removal is recorded.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{parse_response, render_response, HostResponse, IntentLabel};
use crate::text::{char_ngram_set, char_ngrams, normalize};

const BUNDLED_DATAPIPE: &str = include_str!("../data/datapipe.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

/// One training instance. The response fields are not validated on load;
/// that is the structure pass's job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInstance {
    pub system_prompt: String,
    pub comment: String,
    pub intent: IntentLabel,
    pub response: HostResponse,
    pub source: Source,
    pub pair_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naturalness: Option<f64>,
}

#[derive(Debug, Error)]
pub enum DatapipeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<DatasetInstance>, DatapipeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(&line).map_err(|e| DatapipeError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_jsonl(mut writer: impl Write, instances: &[DatasetInstance]) -> Result<(), DatapipeError> {
    for inst in instances {
        serde_json::to_writer(&mut writer, inst).map_err(|e| DatapipeError::Io(e.into()))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupConfig {
    pub threshold: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub tau: f64,
    pub n: usize,
    pub dims: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub naturalness_min: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiiPatternSpec {
    pub name: String,
    pub pattern: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatapipeConfig {
    pub dedup: DedupConfig,
    pub coherence: CoherenceConfig,
    pub structure: StructureConfig,
    pub pii: Vec<PiiPatternSpec>,
}

impl DatapipeConfig {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_DATAPIPE).expect("bundled datapipe config is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, DatapipeError> {
        let cfg: DatapipeConfig =
            toml::from_str(text).map_err(|e| DatapipeError::Config(e.to_string()))?;
        if cfg.dedup.n == 0 || cfg.coherence.n == 0 || cfg.coherence.dims == 0 {
            return Err(DatapipeError::Config("n-gram sizes and dims must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.dedup.threshold) {
            return Err(DatapipeError::Config("dedup threshold must lie in [0, 1]".into()));
        }
        PiiScrubber::compile(&cfg.pii)?;
        Ok(cfg)
    }
}

/// `|A ∩ B| / |A ∪ B|` over character n-gram sets. Two empty sets count as
/// identical; one empty set shares nothing.
pub fn jaccard_ngram(a: &str, b: &str, n: usize) -> f64 {
    let ga = char_ngram_set(a, n);
    let gb = char_ngram_set(b, n);
    match (ga.is_empty(), gb.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let inter = ga.intersection(&gb).count();
            inter as f64 / (ga.len() + gb.len() - inter) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    /// Input position of the removed instance.
    pub removed: usize,
    /// Input position of the earlier survivor it duplicated.
    pub kept: usize,
}

/// Greedy in-file-order near-duplicate removal on normalized comment text:
/// an instance is dropped when its Jaccard similarity to any earlier survivor
/// exceeds `threshold` or its gram set equals the survivor's.
pub fn dedup_pass(
    instances: &[DatasetInstance],
    threshold: f64,
    n: usize,
) -> (Vec<usize>, Vec<DuplicatePair>) {
    let grams: Vec<_> = instances
        .iter()
        .map(|i| char_ngram_set(&normalize(&i.comment), n))
        .collect();
    // Inverted index from gram to surviving positions, so each instance only
    // compares against survivors sharing at least one gram.
    let mut index: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut empty_survivor: Option<usize> = None;
    let mut survivors = Vec::new();
    let mut removed = Vec::new();
    for (i, g) in grams.iter().enumerate() {
        let duplicate_of = if g.is_empty() {
            empty_survivor
        } else {
            let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
            for gram in g {
                for &k in index.get(gram.as_str()).into_iter().flatten() {
                    *shared.entry(k).or_default() += 1;
                }
            }
            shared.into_iter().find_map(|(k, inter)| {
                let union = g.len() + grams[k].len() - inter;
                (inter == union || inter as f64 / union as f64 > threshold).then_some(k)
            })
        };
        match duplicate_of {
            Some(kept) => removed.push(DuplicatePair { removed: i, kept }),
            None => {
                survivors.push(i);
                if g.is_empty() {
                    empty_survivor.get_or_insert(i);
                } else {
                    for gram in g {
                        index.entry(gram.as_str()).or_default().push(i);
                    }
                }
            }
        }
    }
    (survivors, removed)
}

/// Compiled PII patterns.
#[derive(Debug, Clone)]
pub struct PiiScrubber {
    patterns: Vec<(String, Regex, String)>,
}

impl PiiScrubber {
    pub fn compile(specs: &[PiiPatternSpec]) -> Result<Self, DatapipeError> {
        let mut patterns = Vec::with_capacity(specs.len());
        for s in specs {
            let re = Regex::new(&s.pattern)
                .map_err(|e| DatapipeError::Config(format!("pii pattern {}: {e}", s.name)))?;
            patterns.push((s.name.clone(), re, s.replacement.clone()));
        }
        Ok(Self { patterns })
    }

    /// Applies every pattern until the text stops changing. Boundary
    /// characters consumed by one match can hide an adjacent one, hence the
    /// repeat.
    pub fn scrub(&self, text: &str) -> String {
        let mut current = text.to_string();
        loop {
            let mut next = current.clone();
            for (_, re, rep) in &self.patterns {
                next = re.replace_all(&next, rep.as_str()).into_owned();
            }
            if next == current {
                return current;
            }
            current = next;
        }
    }
}

/// Scrubs the comment and all response fields. Returns the number of
/// instances that changed.
pub fn pii_pass(instances: &mut [DatasetInstance], scrubber: &PiiScrubber) -> usize {
    let mut changed = 0;
    for inst in instances.iter_mut() {
        let before = (inst.comment.clone(), inst.response.clone());
        inst.comment = scrubber.scrub(&inst.comment);
        let r = &mut inst.response;
        r.spoken = scrubber.scrub(&r.spoken);
        r.slogan = scrubber.scrub(&r.slogan);
        r.hook_question = scrubber.scrub(&r.hook_question);
        r.cta = scrubber.scrub(&r.cta);
        if (&inst.comment, &inst.response) != (&before.0, &before.1) {
            changed += 1;
        }
    }
    changed
}

/// Why the structure pass rejected an instance, if it did.
pub fn structure_check(inst: &DatasetInstance, naturalness_min: f64) -> Option<String> {
    if let Err(e) = parse_response(&render_response(&inst.response)) {
        return Some(e.to_string());
    }
    match inst.naturalness {
        Some(score) if !(score > naturalness_min) => Some(format!(
            "naturalness {score} does not exceed {naturalness_min}"
        )),
        _ => None,
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Deterministic test embedding: character n-grams with punctuation and
/// whitespace removed, hashed (FNV-1a) into a fixed number of count buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    pub n: usize,
    pub dims: usize,
}

impl HashedNgramEmbedder {
    pub fn bucket(&self, gram: &str) -> usize {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in gram.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        (h % self.dims as u64) as usize
    }
}

impl Embedder for HashedNgramEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let cleaned: String = normalize(text).chars().filter(|c| c.is_alphanumeric()).collect();
        let mut v = vec![0.0; self.dims];
        for g in char_ngrams(&cleaned, self.n) {
            v[self.bucket(&g)] += 1.0;
        }
        v
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn coherence(inst: &DatasetInstance, embedder: &dyn Embedder) -> f64 {
    cosine(&embedder.embed(&inst.comment), &embedder.embed(&inst.response.spoken))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub total: usize,
    pub counts: BTreeMap<IntentLabel, usize>,
    pub proportions: BTreeMap<IntentLabel, f64>,
}

pub fn distribution_report(instances: &[DatasetInstance]) -> DistributionReport {
    let mut counts: BTreeMap<IntentLabel, usize> =
        IntentLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for inst in instances {
        *counts.entry(inst.intent).or_default() += 1;
    }
    let total = instances.len();
    let proportions = counts
        .iter()
        .map(|(&l, &c)| (l, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect();
    DistributionReport {
        total,
        counts,
        proportions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Dedup,
    Pii,
    Structure,
    Coherence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    /// Input position.
    pub index: usize,
    pub pair_id: String,
    pub pass: Pass,
    pub reason: String,
}

/// Real/synthetic pairing problems in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIssue {
    pub pair_id: String,
    pub real: usize,
    pub synthetic: usize,
}

/// Pair ids that are not shared by exactly one real and one synthetic
/// instance.
pub fn check_pairs(instances: &[DatasetInstance]) -> Vec<PairIssue> {
    let mut by_id: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for inst in instances {
        let e = by_id.entry(inst.pair_id.as_str()).or_default();
        match inst.source {
            Source::Real => e.0 += 1,
            Source::Synthetic => e.1 += 1,
        }
    }
    by_id
        .into_iter()
        .filter(|(_, (r, s))| (*r, *s) != (1, 1))
        .map(|(id, (real, synthetic))| PairIssue {
            pair_id: id.to_string(),
            real,
            synthetic,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input: usize,
    pub dedup_removed: usize,
    pub pii_scrubbed: usize,
    pub structure_rejected: usize,
    pub coherence_rejected: usize,
    pub survivors: usize,
    pub intent_histogram: DistributionReport,
    pub input_pair_issues: Vec<PairIssue>,
    pub removals: Vec<Removal>,
}

/// Runs all four passes in order and returns the survivors with a report.
pub fn clean(
    instances: Vec<DatasetInstance>,
    config: &DatapipeConfig,
    embedder: &dyn Embedder,
) -> Result<(Vec<DatasetInstance>, CleaningReport), DatapipeError> {
    let input = instances.len();
    let input_pair_issues = check_pairs(&instances);
    let mut removals = Vec::new();

    let (kept, dups) = dedup_pass(&instances, config.dedup.threshold, config.dedup.n);
    for d in &dups {
        removals.push(Removal {
            index: d.removed,
            pair_id: instances[d.removed].pair_id.clone(),
            pass: Pass::Dedup,
            reason: format!("near-duplicate of instance {}", d.kept),
        });
    }
    let mut current: Vec<(usize, DatasetInstance)> = {
        let mut slots: Vec<Option<DatasetInstance>> = instances.into_iter().map(Some).collect();
        kept.iter()
            .map(|&i| (i, slots[i].take().expect("survivor index is unique")))
            .collect()
    };

    let scrubber = PiiScrubber::compile(&config.pii)?;
    let mut scrubbed_only: Vec<DatasetInstance> = current.iter().map(|(_, d)| d.clone()).collect();
    let pii_scrubbed = pii_pass(&mut scrubbed_only, &scrubber);
    for ((_, slot), scrubbed) in current.iter_mut().zip(scrubbed_only) {
        *slot = scrubbed;
    }

    let mut structure_rejected = 0;
    current.retain(|(i, inst)| match structure_check(inst, config.structure.naturalness_min) {
        Some(reason) => {
            structure_rejected += 1;
            removals.push(Removal {
                index: *i,
                pair_id: inst.pair_id.clone(),
                pass: Pass::Structure,
                reason,
            });
            false
        }
        None => true,
    });

    let mut coherence_rejected = 0;
    let tau = config.coherence.tau;
    current.retain(|(i, inst)| {
        let sim = coherence(inst, embedder);
        if sim >= tau {
            true
        } else {
            coherence_rejected += 1;
            removals.push(Removal {
                index: *i,
                pair_id: inst.pair_id.clone(),
                pass: Pass::Coherence,
                reason: format!("similarity {sim:.4} below {tau}"),
            });
            false
        }
    });

    let survivors: Vec<DatasetInstance> = current.into_iter().map(|(_, d)| d).collect();
    let report = CleaningReport {
        input,
        dedup_removed: dups.len(),
        pii_scrubbed,
        structure_rejected,
        coherence_rejected,
        survivors: survivors.len(),
        intent_histogram: distribution_report(&survivors),
        input_pair_issues,
        removals,
    };
    Ok((survivors, report))
}
