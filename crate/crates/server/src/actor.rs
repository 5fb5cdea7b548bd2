//! One thread per live session. Commands arrive over a channel; between
//! commands the thread advances the session on the wall clock.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use livehost_core::dialogue::{AblationFlags, CommentError, CommentId, ViewerComment};
use livehost_core::SessionRunner;
use tokio::sync::oneshot;

use crate::hub::EventHub;
use crate::wire::SessionStatus;

/// Longest sleep between clock checks.
const MAX_WAIT: Duration = Duration::from_millis(50);

pub enum Command {
    Comment {
        text: String,
        author: String,
        reply: oneshot::Sender<Result<CommentId, CommentError>>,
    },
    SetAblation {
        flags: AblationFlags,
        reply: oneshot::Sender<AblationFlags>,
    },
    Stop,
}

pub struct SessionHandle {
    pub id: String,
    pub hub: Arc<EventHub>,
    commands: mpsc::Sender<Command>,
    status: Arc<Mutex<SessionStatus>>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl SessionHandle {
    /// `epoch` is the instant the session clock read 0.
    pub fn spawn(id: String, runner: SessionRunner, hub: Arc<EventHub>, epoch: Instant) -> Self {
        let (tx, rx) = mpsc::channel();
        let status = Arc::new(Mutex::new(status_of(&id, &runner, &hub)));
        let thread = {
            let hub = hub.clone();
            let status = status.clone();
            let id = id.clone();
            std::thread::Builder::new()
                .name(format!("session-{id}"))
                .spawn(move || run(id, runner, hub, status, rx, epoch))
                .expect("spawn session thread")
        };
        Self {
            id,
            hub,
            commands: tx,
            status,
            thread: Mutex::new(Some(thread)),
        }
    }

    pub fn send(&self, cmd: Command) -> bool {
        self.commands.send(cmd).is_ok()
    }

    pub fn status(&self) -> SessionStatus {
        self.status.lock().expect("status poisoned").clone()
    }

    pub fn stop(&self) {
        let _ = self.commands.send(Command::Stop);
        if let Some(t) = self.thread.lock().expect("thread slot poisoned").take() {
            let _ = t.join();
        }
    }
}

impl Drop for SessionHandle {
    fn drop(&mut self) {
        let _ = self.commands.send(Command::Stop);
    }
}

fn status_of(id: &str, runner: &SessionRunner, hub: &EventHub) -> SessionStatus {
    let s = runner.session();
    SessionStatus {
        session_id: id.to_string(),
        stage: s.stage(),
        ablation: s.config().ablation,
        queue_len: s.queue_len(),
        focus: s.focus(),
        last_seq: hub.last_seq(),
    }
}

fn run(
    id: String,
    mut runner: SessionRunner,
    hub: Arc<EventHub>,
    status: Arc<Mutex<SessionStatus>>,
    rx: mpsc::Receiver<Command>,
    epoch: Instant,
) {
    let clock = move || epoch.elapsed().as_millis() as u64;
    let mut next_comment = 0u64;
    loop {
        let now = clock();
        let wait = runner
            .session()
            .next_deadline()
            .map_or(MAX_WAIT, |d| Duration::from_millis(d.saturating_sub(now)))
            .min(MAX_WAIT);
        match rx.recv_timeout(wait) {
            Ok(Command::Comment { text, author, reply }) => {
                let now = clock();
                hub.publish(runner.advance(now).events);
                let id = CommentId(next_comment);
                match ViewerComment::new(id, text, &author, now) {
                    Ok(comment) => {
                        next_comment += 1;
                        hub.publish(runner.post_comment(comment).events);
                        let _ = reply.send(Ok(id));
                    }
                    Err(e) => {
                        let _ = reply.send(Err(e));
                    }
                }
            }
            Ok(Command::SetAblation { flags, reply }) => {
                runner.session_mut().set_ablation(flags);
                let _ = reply.send(runner.session().config().ablation);
            }
            Ok(Command::Stop) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {}
        }
        hub.publish(runner.advance(clock()).events);
        *status.lock().expect("status poisoned") = status_of(&id, &runner, &hub);
    }
    hub.close();
    tracing::info!(session = %id, "session stopped");
}
