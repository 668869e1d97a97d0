use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use serde::Serialize;
use taskgrasp::pipeline::ProgressEvent;
use tokio::sync::broadcast;

#[derive(Debug, Clone, Serialize)]
pub struct Done {
    pub run_id: String,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub enum Message {
    Progress(ProgressEvent),
    Done(Done),
}

struct Entry {
    events: Vec<ProgressEvent>,
    done: Option<Done>,
    tx: broadcast::Sender<Message>,
}

/// Event logs of the runs started by this process. Subscribers get the
/// backlog first, then live messages.
#[derive(Default)]
pub struct LiveRuns {
    runs: Mutex<HashMap<String, Entry>>,
}

impl LiveRuns {
    pub fn open(&self, run_id: &str) {
        let (tx, _) = broadcast::channel(64);
        self.runs.lock().unwrap().insert(run_id.to_string(), Entry { events: vec![], done: None, tx });
    }

    pub fn push(&self, ev: &ProgressEvent) {
        let mut runs = self.runs.lock().unwrap();
        if let Some(e) = runs.get_mut(&ev.run_id) {
            e.events.push(ev.clone());
            let _ = e.tx.send(Message::Progress(ev.clone()));
        }
    }

    pub fn finish(&self, run_id: &str, complete: bool, error: Option<String>) {
        let mut runs = self.runs.lock().unwrap();
        if let Some(e) = runs.get_mut(run_id) {
            let done = Done { run_id: run_id.to_string(), complete, error };
            e.done = Some(done.clone());
            let _ = e.tx.send(Message::Done(done));
        }
    }

    pub fn is_running(&self, run_id: &str) -> bool {
        self.runs.lock().unwrap().get(run_id).is_some_and(|e| e.done.is_none())
    }

    pub fn subscribe(&self, run_id: &str) -> Option<Feed> {
        let runs = self.runs.lock().unwrap();
        let e = runs.get(run_id)?;
        let mut backlog: VecDeque<Message> = e.events.iter().cloned().map(Message::Progress).collect();
        let rx = match &e.done {
            Some(d) => {
                backlog.push_back(Message::Done(d.clone()));
                None
            }
            None => Some(e.tx.subscribe()),
        };
        Some(Feed { backlog, rx })
    }
}

pub struct Feed {
    backlog: VecDeque<Message>,
    rx: Option<broadcast::Receiver<Message>>,
}

impl Feed {
    pub fn finished(run_id: &str, complete: bool) -> Self {
        let done = Done { run_id: run_id.to_string(), complete, error: None };
        Self { backlog: VecDeque::from([Message::Done(done)]), rx: None }
    }

    pub async fn next(&mut self) -> Option<Message> {
        if let Some(m) = self.backlog.pop_front() {
            return Some(m);
        }
        let rx = self.rx.as_mut()?;
        loop {
            match rx.recv().await {
                Ok(m) => return Some(m),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}
