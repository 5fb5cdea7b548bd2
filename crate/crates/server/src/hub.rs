//! Per-session event log with sequence numbers and live fan-out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use livehost_core::session::EventRecord;
use tokio::sync::watch;

use crate::wire::ApiEvent;

pub struct EventHub {
    session_id: String,
    events: Mutex<Vec<ApiEvent>>,
    latest: watch::Sender<u64>,
    closed: AtomicBool,
    log: Option<Mutex<BufWriter<File>>>,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl EventHub {
    pub fn new(session_id: impl Into<String>, log: Option<File>) -> Self {
        Self {
            session_id: session_id.into(),
            events: Mutex::new(Vec::new()),
            latest: watch::channel(0).0,
            closed: AtomicBool::new(false),
            log: log.map(|f| Mutex::new(BufWriter::new(f))),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Appends records in order and wakes subscribers. Returns the last
    /// sequence number.
    pub fn publish(&self, records: Vec<EventRecord>) -> u64 {
        let mut events = self.events.lock().expect("event hub poisoned");
        if records.is_empty() {
            return events.len() as u64;
        }
        let now = unix_ms();
        let mut log = self.log.as_ref().map(|l| l.lock().expect("event log poisoned"));
        for r in records {
            let ev = ApiEvent {
                seq: events.len() as u64 + 1,
                session_id: self.session_id.clone(),
                server_time_ms: now,
                session_time_ms: r.at,
                event: r.event,
            };
            if let Some(w) = log.as_mut() {
                let line = serde_json::to_string(&ev).expect("events serialize");
                if let Err(e) = writeln!(w, "{line}") {
                    tracing::warn!(session = %self.session_id, "event log write failed: {e}");
                }
            }
            events.push(ev);
        }
        if let Some(w) = log.as_mut() {
            let _ = w.flush();
        }
        let last = events.len() as u64;
        drop(events);
        self.latest.send_replace(last);
        last
    }

    /// Events with `seq > from_seq`.
    pub fn since(&self, from_seq: u64) -> Vec<ApiEvent> {
        let events = self.events.lock().expect("event hub poisoned");
        let start = (from_seq as usize).min(events.len());
        events[start..].to_vec()
    }

    pub fn last_seq(&self) -> u64 {
        *self.latest.borrow()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.latest.subscribe()
    }

    /// Ends live streams once they have drained.
    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.latest.send_modify(|_| {});
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use livehost_core::session::SessionEvent;

    fn rec(at: u64) -> EventRecord {
        EventRecord {
            at,
            event: SessionEvent::CommentDropped {
                comment_id: livehost_core::CommentId(at),
            },
        }
    }

    #[test]
    fn sequence_numbers_are_dense() {
        let hub = EventHub::new("s", None);
        assert_eq!(hub.publish(vec![rec(1), rec(2)]), 2);
        assert_eq!(hub.publish(vec![rec(3)]), 3);
        let seqs: Vec<u64> = hub.since(0).iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
        assert_eq!(hub.since(2)[0].seq, 3);
        assert!(hub.since(9).is_empty());
    }

    #[test]
    fn log_lines_match_events() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let hub = EventHub::new("s", Some(File::create(&path).unwrap()));
        hub.publish(vec![rec(1), rec(2)]);
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: Vec<ApiEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(parsed, hub.since(0));
    }
}
