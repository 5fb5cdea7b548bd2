//! Couples a [`Session`] with the generation [`Pipeline`]: every time the
//! session is interrupted, a turn is generated and handed back for delivery.

use std::sync::Arc;

use crate::dialogue::{Millis, ViewerComment};
use crate::pipeline::{Pipeline, TurnOutcome};
use crate::rerank::RecentHistory;
use crate::session::{EventRecord, ReadyResponse, Session};

/// Wall-clock source for live serving; simulated runs leave it unset.
pub type Clock = Box<dyn Fn() -> Millis + Send>;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct StepOutput {
    pub events: Vec<EventRecord>,
    pub turns: Vec<TurnOutcome>,
}

impl StepOutput {
    fn extend(&mut self, other: StepOutput) {
        self.events.extend(other.events);
        self.turns.extend(other.turns);
    }
}

pub struct SessionRunner {
    session: Session,
    pipeline: Arc<Pipeline>,
    history: RecentHistory,
    seed: u64,
    clock: Option<Clock>,
}

impl SessionRunner {
    pub fn new(session: Session, pipeline: Arc<Pipeline>, seed: u64) -> Self {
        Self {
            session,
            pipeline,
            history: RecentHistory::new(),
            seed,
            clock: None,
        }
    }

    /// Responses are delivered at the clock's reading instead of at the
    /// interrupt time.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut Session {
        &mut self.session
    }

    pub fn history(&self) -> &RecentHistory {
        &self.history
    }

    pub fn post_comment(&mut self, comment: ViewerComment) -> StepOutput {
        let mut out = StepOutput {
            events: self.session.on_comment(comment),
            turns: Vec::new(),
        };
        out.extend(self.resolve());
        out
    }

    /// Runs the session clock forward to `now`, generating responses as
    /// interrupts come due.
    pub fn advance(&mut self, now: Millis) -> StepOutput {
        let mut out = StepOutput::default();
        loop {
            let events = self.session.tick(now);
            let progressed = !events.is_empty();
            out.events.extend(events);
            let resolved = self.resolve();
            let responded = !resolved.turns.is_empty();
            out.extend(resolved);
            if !progressed && !responded {
                return out;
            }
        }
    }

    fn resolve(&mut self) -> StepOutput {
        let mut out = StepOutput::default();
        while let Some(comment) = self.session.awaiting_response().cloned() {
            let flags = self.session.config().ablation;
            let seed = self.seed ^ comment.comment_id.0.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let turn = self.pipeline.respond(
                &comment,
                self.session.focus(),
                &mut self.history,
                flags,
                seed,
            );
            let at = self.clock.as_ref().map_or(self.session.now(), |c| c());
            let ready = ReadyResponse {
                response: turn.response.clone(),
                product: turn.active,
                fallback: turn.fallback,
            };
            let events = self
                .session
                .on_response_ready(ready, at)
                .expect("session is interrupted while awaiting a response");
            out.events.extend(events);
            out.turns.push(turn);
        }
        out
    }
}
