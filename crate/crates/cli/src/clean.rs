//! `datapipe clean`.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use livehost_core::datapipe::{self, CleaningReport, DatapipeConfig, HashedNgramEmbedder};

pub fn load_config(path: Option<&Path>) -> anyhow::Result<DatapipeConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(DatapipeConfig::from_toml(&text)?)
        }
        None => Ok(DatapipeConfig::bundled()),
    }
}

pub fn run(input: &Path, output: &Path, config: &DatapipeConfig) -> anyhow::Result<CleaningReport> {
    let instances = datapipe::read_jsonl(crate::open(input)?)?;
    let embedder = HashedNgramEmbedder {
        n: config.coherence.n,
        dims: config.coherence.dims,
    };
    let (survivors, report) = datapipe::clean(instances, config, &embedder)?;
    let mut out = crate::create(output)?;
    datapipe::write_jsonl(&mut out, &survivors)?;
    out.flush()?;
    Ok(report)
}

pub fn write_text_report(out: &mut dyn Write, r: &CleaningReport) -> std::io::Result<()> {
    writeln!(out, "input               {}", r.input)?;
    writeln!(out, "dedup removed       {}", r.dedup_removed)?;
    writeln!(out, "pii scrubbed        {}", r.pii_scrubbed)?;
    writeln!(out, "structure rejected  {}", r.structure_rejected)?;
    writeln!(out, "coherence rejected  {}", r.coherence_rejected)?;
    writeln!(out, "survivors           {}", r.survivors)?;
    writeln!(out, "intents:")?;
    for (label, count) in &r.intent_histogram.counts {
        let p = r.intent_histogram.proportions.get(label).copied().unwrap_or(0.0);
        writeln!(out, "  {:<14} {count:>6}  {:>6.1}%", label.as_str(), p * 100.0)?;
    }
    for issue in &r.input_pair_issues {
        writeln!(
            out,
            "pair {}: {} real, {} synthetic",
            issue.pair_id, issue.real, issue.synthetic
        )?;
    }
    Ok(())
}
