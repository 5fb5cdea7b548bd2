#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::sync::Arc;
use std::time::Duration;

use livehost_core::{Catalogue, DialogueConfig, Pipeline, SessionConfig, StubBackend, Synthesizer};
use livehost_core::media::StubSynthesizer;
use livehost_server::wire::{ApiEvent, CommentAck, CreateSessionResponse};
use livehost_server::{gateway, BackgroundServer, Gateway};
use reqwest::blocking::{Client, Response};
use serde_json::json;

pub fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(20)).build().unwrap()
}

pub fn stub_gateway(defaults: SessionConfig, synthesizer: Arc<dyn Synthesizer>) -> Gateway {
    let catalogue = Arc::new(Catalogue::bundled());
    let dialogue = DialogueConfig::bundled();
    let backend =
        Arc::new(StubBackend::new(catalogue.clone()).with_stock_openings(dialogue.rerank.stock_openings.clone()));
    let pipeline = Arc::new(Pipeline::new(catalogue.clone(), dialogue, backend));
    Gateway::new(catalogue, pipeline, synthesizer, defaults)
}

pub fn start(gw: Gateway) -> (BackgroundServer, Arc<Gateway>) {
    let gw = Arc::new(gw);
    let server = BackgroundServer::start(([127, 0, 0, 1], 0).into(), gateway::router(gw.clone())).unwrap();
    (server, gw)
}

pub fn start_default() -> (BackgroundServer, Arc<Gateway>) {
    start(stub_gateway(SessionConfig::default(), Arc::new(StubSynthesizer::default())))
}

pub fn create_session(c: &Client, base: &str) -> String {
    let resp = c.post(format!("{base}/v1/sessions")).json(&json!({})).send().unwrap();
    assert_eq!(resp.status(), 201);
    resp.json::<CreateSessionResponse>().unwrap().session_id
}

pub fn comment(c: &Client, base: &str, sid: &str, text: &str) -> CommentAck {
    let resp = c
        .post(format!("{base}/v1/sessions/{sid}/comments"))
        .json(&json!({"text": text, "author": "viewer"}))
        .send()
        .unwrap();
    assert_eq!(resp.status(), 202);
    resp.json().unwrap()
}

/// Blocking reader over a server-sent event stream.
pub struct SseReader {
    lines: BufReader<Response>,
}

impl SseReader {
    pub fn open(c: &Client, base: &str, sid: &str, from_seq: Option<u64>, last_event_id: Option<u64>) -> Self {
        let mut url = format!("{base}/v1/sessions/{sid}/events");
        if let Some(k) = from_seq {
            url.push_str(&format!("?from_seq={k}"));
        }
        let mut req = c.get(url);
        if let Some(k) = last_event_id {
            req = req.header("Last-Event-ID", k.to_string());
        }
        let resp = req.send().unwrap();
        assert_eq!(resp.status(), 200);
        assert!(resp
            .headers()
            .get("content-type")
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with("text/event-stream"));
        Self {
            lines: BufReader::new(resp),
        }
    }

    /// Next event, checking that the `id` and `event` fields agree with the
    /// payload.
    pub fn next_event(&mut self) -> Option<ApiEvent> {
        let (mut id, mut kind, mut data) = (None, None, String::new());
        loop {
            let mut line = String::new();
            if self.lines.read_line(&mut line).ok()? == 0 {
                return None;
            }
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                if data.is_empty() {
                    continue;
                }
                let ev: ApiEvent = serde_json::from_str(&data).unwrap();
                assert_eq!(id, Some(ev.seq));
                assert_eq!(kind.as_deref(), Some(ev.event.kind()));
                return Some(ev);
            }
            if let Some(v) = line.strip_prefix("id:") {
                id = v.trim().parse().ok();
            } else if let Some(v) = line.strip_prefix("event:") {
                kind = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push_str(v.strip_prefix(' ').unwrap_or(v));
            }
        }
    }

    pub fn take(&mut self, n: usize) -> Vec<ApiEvent> {
        (0..n).map(|_| self.next_event().expect("stream ended early")).collect()
    }

    pub fn until(&mut self, mut stop: impl FnMut(&ApiEvent) -> bool) -> Vec<ApiEvent> {
        let mut out = Vec::new();
        loop {
            let ev = self.next_event().expect("stream ended early");
            let done = stop(&ev);
            out.push(ev);
            if done {
                return out;
            }
        }
    }
}
