//! Five-stage session state machine arbitrating the single audio lease between
//! idle narration and interactive responses.
//!
//! The machine is driven entirely by injected timestamps. Narration segments
//! and responses occupy the lease for their synthesized duration; [`Session::tick`]
//! fires every transition that has come due. A comment arriving during idle
//! narration preempts the current sentence and the resume pointer is saved at
//! the following sentence boundary.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{Catalogue, RoutingId};
use crate::dialogue::{AblationFlags, CommentId, HostResponse, Millis, ViewerComment};
use crate::media::{stub_duration_ms, Synthesizer, DEFAULT_SPEAKING_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStage {
    Init,
    IdleNarration,
    Interrupted,
    Responding,
    Hold,
}

impl SessionStage {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStage::Init => "Init",
            SessionStage::IdleNarration => "IdleNarration",
            SessionStage::Interrupted => "Interrupted",
            SessionStage::Responding => "Responding",
            SessionStage::Hold => "Hold",
        }
    }

    /// Whether the interactive channel owns the lease in this stage.
    pub fn is_interactive(self) -> bool {
        matches!(
            self,
            SessionStage::Interrupted | SessionStage::Responding | SessionStage::Hold
        )
    }
}

impl fmt::Display for SessionStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The legal transition set.
pub fn is_legal_edge(from: SessionStage, to: SessionStage) -> bool {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaseHolder {
    None,
    IdleChannel,
    InteractiveChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioLease {
    pub holder: LeaseHolder,
    pub acquired_at: Millis,
    pub expires_at: Option<Millis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResumePointer {
    pub script_index: usize,
    pub sentence_index: usize,
}

impl ResumePointer {
    pub const START: ResumePointer = ResumePointer {
        script_index: 0,
        sentence_index: 0,
    };

    pub fn new(script_index: usize, sentence_index: usize) -> Self {
        Self {
            script_index,
            sentence_index,
        }
    }
}

impl fmt::Display for ResumePointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.script_index, self.sentence_index)
    }
}

/// Sentence counts per script; enough to walk the corpus in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusShape(pub Vec<usize>);

impl CorpusShape {
    pub fn of(catalogue: &Catalogue) -> Self {
        CorpusShape(catalogue.scripts().iter().map(|s| s.sentences.len()).collect())
    }

    pub fn contains(&self, p: ResumePointer) -> bool {
        self.0
            .get(p.script_index)
            .is_some_and(|&n| p.sentence_index < n)
    }

    /// The sentence after `p`, wrapping from the last sentence of the last
    /// script to `(0, 0)`.
    pub fn successor(&self, p: ResumePointer) -> ResumePointer {
        if p.sentence_index + 1 < self.0[p.script_index] {
            ResumePointer::new(p.script_index, p.sentence_index + 1)
        } else if p.script_index + 1 < self.0.len() {
            ResumePointer::new(p.script_index + 1, 0)
        } else {
            ResumePointer::START
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub hold_period_ms: i64,
    pub comment_queue_capacity: usize,
    pub ablation: AblationFlags,
    /// Characters per second, used when the synthesizer is unavailable.
    pub speaking_rate: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            hold_period_ms: 2000,
            comment_queue_capacity: 8,
            ablation: AblationFlags::BASELINE,
            speaking_rate: DEFAULT_SPEAKING_RATE,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.hold_period_ms < 0 {
            return Err(SessionError::InvalidConfig(format!(
                "hold_period_ms must be >= 0, got {}",
                self.hold_period_ms
            )));
        }
        if self.comment_queue_capacity == 0 {
            return Err(SessionError::InvalidConfig(
                "comment_queue_capacity must be >= 1".into(),
            ));
        }
        if !(self.speaking_rate.is_finite() && self.speaking_rate > 0.0) {
            return Err(SessionError::InvalidConfig(format!(
                "speaking_rate must be positive, got {}",
                self.speaking_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("pitch script corpus is empty")]
    EmptyCorpus,
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("{op} is not valid in stage {stage}")]
    WrongStage { op: &'static str, stage: SessionStage },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    NarrationSegment {
        text: String,
        script_index: usize,
        sentence_index: usize,
        duration_ms: u64,
        asset_id: Option<String>,
    },
    ResponseDelivery {
        response: HostResponse,
        comment_id: CommentId,
        duration_ms: u64,
        asset_id: Option<String>,
        fallback: bool,
    },
    StageChange {
        from: SessionStage,
        to: SessionStage,
        at: Millis,
    },
    ProductFocus {
        routing_id: RoutingId,
        name: String,
    },
    CommentQueued {
        comment_id: CommentId,
        depth: usize,
    },
    CommentDropped {
        comment_id: CommentId,
    },
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::NarrationSegment { .. } => "narration_segment",
            SessionEvent::ResponseDelivery { .. } => "response_delivery",
            SessionEvent::StageChange { .. } => "stage_change",
            SessionEvent::ProductFocus { .. } => "product_focus",
            SessionEvent::CommentQueued { .. } => "comment_queued",
            SessionEvent::CommentDropped { .. } => "comment_dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Session time at which the event took effect.
    pub at: Millis,
    pub event: SessionEvent,
}

/// The response the interactive channel is ready to play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadyResponse {
    pub response: HostResponse,
    pub product: Option<RoutingId>,
    pub fallback: bool,
}

pub struct Session {
    catalogue: Arc<Catalogue>,
    synth: Arc<dyn Synthesizer>,
    config: SessionConfig,
    shape: CorpusShape,
    stage: SessionStage,
    lease: AudioLease,
    now: Millis,
    next: ResumePointer,
    saved: Option<ResumePointer>,
    playback_end: Option<Millis>,
    hold_until: Option<Millis>,
    queue: VecDeque<ViewerComment>,
    pending: Option<ViewerComment>,
    focus: Option<RoutingId>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("stage", &self.stage)
            .field("lease", &self.lease)
            .field("now", &self.now)
            .field("next", &self.next)
            .field("saved", &self.saved)
            .field("queue", &self.queue.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Starts a session at time `now`: Init, then straight into idle narration
    /// from `(0, 0)`.
    pub fn start(
        config: SessionConfig,
        catalogue: Arc<Catalogue>,
        synth: Arc<dyn Synthesizer>,
        now: Millis,
    ) -> Result<(Session, Vec<EventRecord>), SessionError> {
        config.validate()?;
        let shape = CorpusShape::of(&catalogue);
        if shape.0.is_empty() || shape.0.contains(&0) {
            return Err(SessionError::EmptyCorpus);
        }
        let mut s = Session {
            catalogue,
            synth,
            config,
            shape,
            stage: SessionStage::Init,
            lease: AudioLease {
                holder: LeaseHolder::None,
                acquired_at: now,
                expires_at: None,
            },
            now,
            next: ResumePointer::START,
            saved: None,
            playback_end: None,
            hold_until: None,
            queue: VecDeque::new(),
            pending: None,
            focus: None,
        };
        let mut events = Vec::new();
        s.set_stage(SessionStage::IdleNarration, now, &mut events);
        s.start_narration(now, &mut events);
        Ok((s, events))
    }

    pub fn stage(&self) -> SessionStage {
        self.stage
    }

    pub fn lease(&self) -> AudioLease {
        self.lease
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn set_ablation(&mut self, flags: AblationFlags) {
        self.config.ablation = flags;
    }

    pub fn catalogue(&self) -> &Arc<Catalogue> {
        &self.catalogue
    }

    pub fn corpus_shape(&self) -> &CorpusShape {
        &self.shape
    }

    /// Next narration sentence to be played.
    pub fn next_pointer(&self) -> ResumePointer {
        self.next
    }

    /// Resume pointer saved by the most recent interrupt, while interactive.
    pub fn saved_pointer(&self) -> Option<ResumePointer> {
        self.saved
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// The product currently in focus (narrated or discussed).
    pub fn focus(&self) -> Option<RoutingId> {
        self.focus
    }

    /// The comment waiting for a generated response, if any.
    pub fn awaiting_response(&self) -> Option<&ViewerComment> {
        match self.stage {
            SessionStage::Interrupted => self.pending.as_ref(),
            _ => None,
        }
    }

    /// When the next timed transition is due.
    pub fn next_deadline(&self) -> Option<Millis> {
        match self.stage {
            SessionStage::IdleNarration | SessionStage::Responding => self.playback_end,
            SessionStage::Hold => self.hold_until,
            _ => None,
        }
    }

    /// Fires every transition due at or before `now`. Stops early on entering
    /// `Interrupted`, leaving the session clock at the interrupt time so the
    /// response can be delivered from there.
    pub fn tick(&mut self, now: Millis) -> Vec<EventRecord> {
        let mut events = Vec::new();
        self.advance(now, true, &mut events);
        events
    }

    /// Accepts a comment. Idle narration is preempted; otherwise the comment
    /// is queued, dropping the oldest when full.
    pub fn on_comment(&mut self, comment: ViewerComment) -> Vec<EventRecord> {
        let mut events = Vec::new();
        let at = comment.arrival_time.max(self.now);
        // A segment ending exactly at arrival counts as finished, but the next
        // one is not started.
        self.advance(at, false, &mut events);
        if self.stage == SessionStage::Interrupted {
            self.enqueue(comment, &mut events);
            return events;
        }
        self.now = at;
        match self.stage {
            SessionStage::IdleNarration => {
                self.saved = Some(self.next);
                self.playback_end = None;
                self.pending = Some(comment);
                self.set_stage(SessionStage::Interrupted, at, &mut events);
            }
            SessionStage::Responding | SessionStage::Hold => self.enqueue(comment, &mut events),
            SessionStage::Init | SessionStage::Interrupted => unreachable!("handled above"),
        }
        events
    }

    /// Begins delivery of the response to the pending comment.
    pub fn on_response_ready(
        &mut self,
        ready: ReadyResponse,
        now: Millis,
    ) -> Result<Vec<EventRecord>, SessionError> {
        if self.stage != SessionStage::Interrupted {
            return Err(SessionError::WrongStage {
                op: "on_response_ready",
                stage: self.stage,
            });
        }
        let at = now.max(self.now);
        self.now = at;
        let comment = self.pending.take().expect("pending comment while interrupted");
        let mut events = Vec::new();
        if let Some(id) = ready.product {
            self.focus_on(id, at, &mut events);
        }
        let (duration_ms, asset_id) = self.duration_of(&ready.response.spoken);
        self.set_stage(SessionStage::Responding, at, &mut events);
        self.playback_end = Some(at + duration_ms);
        events.push(EventRecord {
            at,
            event: SessionEvent::ResponseDelivery {
                response: ready.response,
                comment_id: comment.comment_id,
                duration_ms,
                asset_id,
                fallback: ready.fallback,
            },
        });
        Ok(events)
    }

    /// Ends response playback early; normally fired by [`Session::tick`].
    pub fn on_playback_complete(&mut self, now: Millis) -> Result<Vec<EventRecord>, SessionError> {
        if self.stage != SessionStage::Responding {
            return Err(SessionError::WrongStage {
                op: "on_playback_complete",
                stage: self.stage,
            });
        }
        let mut events = Vec::new();
        let at = now.max(self.now);
        self.now = at;
        self.enter_hold(at, &mut events);
        Ok(events)
    }

    /// Ends the hold early; normally fired by [`Session::tick`].
    pub fn on_hold_expired(&mut self, now: Millis) -> Result<Vec<EventRecord>, SessionError> {
        if self.stage != SessionStage::Hold {
            return Err(SessionError::WrongStage {
                op: "on_hold_expired",
                stage: self.stage,
            });
        }
        let mut events = Vec::new();
        let at = now.max(self.now);
        self.now = at;
        self.leave_hold(at, &mut events);
        Ok(events)
    }

    fn advance(&mut self, now: Millis, inclusive: bool, events: &mut Vec<EventRecord>) {
        let due = |t: Millis| if inclusive { t <= now } else { t < now };
        loop {
            match self.stage {
                SessionStage::IdleNarration => match self.playback_end {
                    Some(end) if due(end) => {
                        self.now = self.now.max(end);
                        self.start_narration(end, events);
                    }
                    _ => break,
                },
                SessionStage::Responding => match self.playback_end {
                    Some(end) if due(end) => {
                        self.now = self.now.max(end);
                        self.enter_hold(end, events);
                    }
                    _ => break,
                },
                SessionStage::Hold => match self.hold_until {
                    Some(end) if due(end) => {
                        self.now = self.now.max(end);
                        self.leave_hold(end, events);
                    }
                    _ => break,
                },
                SessionStage::Interrupted => return,
                SessionStage::Init => break,
            }
        }
        self.now = self.now.max(now);
    }

    fn enter_hold(&mut self, at: Millis, events: &mut Vec<EventRecord>) {
        self.playback_end = None;
        let until = at + self.config.hold_period_ms as u64;
        self.hold_until = Some(until);
        self.set_stage(SessionStage::Hold, at, events);
    }

    fn leave_hold(&mut self, at: Millis, events: &mut Vec<EventRecord>) {
        self.hold_until = None;
        if let Some(comment) = self.queue.pop_front() {
            self.pending = Some(comment);
            self.set_stage(SessionStage::Interrupted, at, events);
        } else {
            let resume = self.saved.take().unwrap_or(self.next);
            self.next = resume;
            self.set_stage(SessionStage::IdleNarration, at, events);
            self.start_narration(at, events);
        }
    }

    fn enqueue(&mut self, comment: ViewerComment, events: &mut Vec<EventRecord>) {
        let at = self.now;
        if self.queue.len() >= self.config.comment_queue_capacity {
            if let Some(old) = self.queue.pop_front() {
                events.push(EventRecord {
                    at,
                    event: SessionEvent::CommentDropped {
                        comment_id: old.comment_id,
                    },
                });
            }
        }
        let comment_id = comment.comment_id;
        self.queue.push_back(comment);
        events.push(EventRecord {
            at,
            event: SessionEvent::CommentQueued {
                comment_id,
                depth: self.queue.len(),
            },
        });
    }

    fn start_narration(&mut self, at: Millis, events: &mut Vec<EventRecord>) {
        let p = self.next;
        let script = &self.catalogue.scripts()[p.script_index];
        let text = script.sentences[p.sentence_index].text.clone();
        let routing_id = script.routing_id;
        self.focus_on(routing_id, at, events);
        let (duration_ms, asset_id) = self.duration_of(&text);
        self.playback_end = Some(at + duration_ms);
        self.lease.expires_at = self.playback_end;
        self.next = self.shape.successor(p);
        events.push(EventRecord {
            at,
            event: SessionEvent::NarrationSegment {
                text,
                script_index: p.script_index,
                sentence_index: p.sentence_index,
                duration_ms,
                asset_id,
            },
        });
    }

    fn focus_on(&mut self, routing_id: RoutingId, at: Millis, events: &mut Vec<EventRecord>) {
        if self.focus == Some(routing_id) {
            return;
        }
        let Some(record) = self.catalogue.product(routing_id) else {
            return;
        };
        self.focus = Some(routing_id);
        events.push(EventRecord {
            at,
            event: SessionEvent::ProductFocus {
                routing_id,
                name: record.name.clone(),
            },
        });
    }

    fn duration_of(&self, text: &str) -> (u64, Option<String>) {
        match self.synth.synthesize(text) {
            Ok(r) => (r.duration_ms.max(1), Some(r.asset_id)),
            Err(_) => (stub_duration_ms(text, self.config.speaking_rate).max(1), None),
        }
    }

    fn set_stage(&mut self, to: SessionStage, at: Millis, events: &mut Vec<EventRecord>) {
        let from = self.stage;
        debug_assert!(is_legal_edge(from, to), "illegal edge {from} -> {to}");
        self.stage = to;
        let holder = if to.is_interactive() {
            LeaseHolder::InteractiveChannel
        } else if to == SessionStage::IdleNarration {
            LeaseHolder::IdleChannel
        } else {
            LeaseHolder::None
        };
        if holder != self.lease.holder {
            self.lease.holder = holder;
            self.lease.acquired_at = at;
        }
        self.lease.expires_at = match to {
            SessionStage::Hold => self.hold_until,
            _ => None,
        };
        events.push(EventRecord {
            at,
            event: SessionEvent::StageChange { from, to, at },
        });
    }
}

/// A rule broken by an event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub index: usize,
    pub rule: &'static str,
    pub detail: String,
}

/// Checks a recorded event log: legal edges, single lease (no narration or
/// response outside its stage), resume fidelity, in-order narration with
/// wrap-around, and non-decreasing timestamps.
pub fn audit_log(events: &[EventRecord], shape: &CorpusShape) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    let mut stage = SessionStage::Init;
    let mut last_at = 0;
    let mut expected_next: Option<ResumePointer> = None;
    let mut saved: Option<ResumePointer> = None;
    let mut awaiting_resume = false;
    let mut fail = |index: usize, rule: &'static str, detail: String| {
        out.push(AuditViolation {
            index,
            rule,
            detail,
        })
    };
    for (i, rec) in events.iter().enumerate() {
        if rec.at < last_at {
            fail(i, "monotonic_time", format!("{} after {}", rec.at, last_at));
        }
        last_at = rec.at;
        match &rec.event {
            SessionEvent::StageChange { from, to, .. } => {
                if *from != stage {
                    fail(i, "stage_continuity", format!("from {from} while in {stage}"));
                }
                if !is_legal_edge(*from, *to) {
                    fail(i, "legal_edge", format!("{from} -> {to}"));
                }
                if *from == SessionStage::IdleNarration && *to == SessionStage::Interrupted {
                    saved = expected_next;
                }
                if *from == SessionStage::Hold && *to == SessionStage::IdleNarration {
                    awaiting_resume = true;
                }
                stage = *to;
            }
            SessionEvent::NarrationSegment {
                script_index,
                sentence_index,
                ..
            } => {
                let p = ResumePointer::new(*script_index, *sentence_index);
                if stage != SessionStage::IdleNarration {
                    fail(i, "single_lease", format!("narration {p} during {stage}"));
                }
                if !shape.contains(p) {
                    fail(i, "corpus_bounds", format!("{p}"));
                }
                if awaiting_resume {
                    if let Some(s) = saved {
                        if s != p {
                            fail(i, "resume_fidelity", format!("saved {s}, resumed {p}"));
                        }
                    }
                    awaiting_resume = false;
                    saved = None;
                } else if let Some(e) = expected_next {
                    if e != p {
                        fail(i, "narration_order", format!("expected {e}, got {p}"));
                    }
                } else if p != ResumePointer::START {
                    fail(i, "narration_order", format!("first segment {p}"));
                }
                expected_next = shape.contains(p).then(|| shape.successor(p));
            }
            SessionEvent::ResponseDelivery { .. } => {
                if stage != SessionStage::Responding {
                    fail(i, "single_lease", format!("response during {stage}"));
                }
            }
            SessionEvent::ProductFocus { .. }
            | SessionEvent::CommentQueued { .. }
            | SessionEvent::CommentDropped { .. } => {}
        }
    }
    out
}
