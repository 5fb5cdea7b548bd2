//! Offline check of a recorded gateway event log.

use std::io::BufRead;

use anyhow::Context;
use livehost_core::session::{audit_log, AuditViolation, CorpusShape, SessionEvent};
use livehost_server::wire::ApiEvent;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub events: usize,
    pub session_id: Option<String>,
    /// Positions where `seq` did not follow its predecessor by one.
    pub sequence_gaps: Vec<(u64, u64)>,
    pub violations: Vec<String>,
    pub narration_segments: usize,
    pub responses: usize,
    pub dropped_comments: usize,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.sequence_gaps.is_empty() && self.violations.is_empty()
    }
}

pub fn read_log(reader: impl BufRead) -> anyhow::Result<Vec<ApiEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?);
    }
    Ok(out)
}

fn describe(v: &AuditViolation) -> String {
    format!("event {}: {}: {}", v.index, v.rule, v.detail)
}

pub fn check(events: &[ApiEvent], shape: &CorpusShape) -> ReplayReport {
    let mut gaps = Vec::new();
    let mut expected = events.first().map_or(1, |e| e.seq);
    for e in events {
        if e.seq != expected {
            gaps.push((expected, e.seq));
        }
        expected = e.seq + 1;
    }
    let mut violations = Vec::new();
    let sessions: std::collections::BTreeSet<&str> = events.iter().map(|e| e.session_id.as_str()).collect();
    if sessions.len() > 1 {
        violations.push(format!("log mixes {} sessions", sessions.len()));
    }
    let records: Vec<_> = events.iter().map(ApiEvent::record).collect();
    violations.extend(audit_log(&records, shape).iter().map(describe));
    let count = |f: fn(&SessionEvent) -> bool| events.iter().filter(|e| f(&e.event)).count();
    ReplayReport {
        events: events.len(),
        session_id: events.first().map(|e| e.session_id.clone()),
        sequence_gaps: gaps,
        violations,
        narration_segments: count(|e| matches!(e, SessionEvent::NarrationSegment { .. })),
        responses: count(|e| matches!(e, SessionEvent::ResponseDelivery { .. })),
        dropped_comments: count(|e| matches!(e, SessionEvent::CommentDropped { .. })),
    }
}

/// Subtitle and response lines in log order, as a viewer would see them.
pub fn transcript(events: &[ApiEvent]) -> Vec<String> {
    events
        .iter()
        .filter_map(|e| match &e.event {
            SessionEvent::NarrationSegment { text, script_index, sentence_index, .. } => {
                Some(format!("{:>8} narration {script_index}.{sentence_index}  {text}", e.session_time_ms))
            }
            SessionEvent::ResponseDelivery { response, comment_id, .. } => Some(format!(
                "{:>8} response #{}  {} | {} | {} | {}",
                e.session_time_ms, comment_id.0, response.spoken, response.slogan, response.hook_question, response.cta
            )),
            _ => None,
        })
        .collect()
}
