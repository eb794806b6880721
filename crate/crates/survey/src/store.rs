//! Session storage: an in-memory map, optionally backed by an append-only
//! JSONL event log.
//!
//! Every mutation appends one line holding the full session state after
//! the change, so replay keeps the last line per session. After
//! `compact_every` appends the log is rewritten as one `snapshot` line per
//! session (written to a temporary file, then renamed over the log).

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::Session;

pub const EVENT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Created,
    Answered,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub v: u32,
    pub kind: EventKind,
    pub at_ms: u64,
    pub session: Session,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

pub struct EventLog {
    path: PathBuf,
    file: File,
    latest: BTreeMap<String, Session>,
    since_compaction: usize,
    compact_every: usize,
}

impl EventLog {
    /// Open or create the log and replay it. A torn final line (no
    /// trailing newline) is dropped; any other unreadable line is an error.
    pub fn open(path: &Path, compact_every: usize) -> Result<(Self, Vec<Session>)> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(storage(path, e)),
        };
        let torn_tail = !text.is_empty() && !text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut latest = BTreeMap::new();
        for (n, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Event>(line) {
                Ok(event) => {
                    latest.insert(event.session.id().to_string(), event.session);
                }
                Err(_) if torn_tail && n + 1 == lines.len() => {
                    tracing::warn!(path = %path.display(), "dropping torn final event");
                }
                Err(e) => return Err(storage(path, format!("line {}: {e}", n + 1))),
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| storage(path, e))?;
        let mut log = EventLog {
            path: path.to_path_buf(),
            file,
            latest,
            since_compaction: 0,
            compact_every,
        };
        log.compact(0)?;
        let sessions = log.latest.values().cloned().collect();
        Ok((log, sessions))
    }

    pub fn append(&mut self, kind: EventKind, session: &Session, at_ms: u64) -> Result<()> {
        let event = Event {
            v: EVENT_VERSION,
            kind,
            at_ms,
            session: session.clone(),
        };
        let mut line = serde_json::to_string(&event).map_err(|e| storage(&self.path, e))?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| storage(&self.path, e))?;
        self.latest.insert(session.id().to_string(), event.session);
        self.since_compaction += 1;
        if self.since_compaction >= self.compact_every {
            self.compact(at_ms)?;
        }
        Ok(())
    }

    pub fn compact(&mut self, at_ms: u64) -> Result<()> {
        let tmp = self.path.with_extension("compact.tmp");
        {
            let file = File::create(&tmp).map_err(|e| storage(&tmp, e))?;
            let mut w = BufWriter::new(file);
            for session in self.latest.values() {
                let event = Event {
                    v: EVENT_VERSION,
                    kind: EventKind::Snapshot,
                    at_ms,
                    session: session.clone(),
                };
                serde_json::to_writer(&mut w, &event).map_err(|e| storage(&tmp, e))?;
                w.write_all(b"\n").map_err(|e| storage(&tmp, e))?;
            }
            let file = w.into_inner().map_err(|e| storage(&tmp, e.error()))?;
            file.sync_all().map_err(|e| storage(&tmp, e))?;
        }
        std::fs::rename(&tmp, &self.path).map_err(|e| storage(&self.path, e))?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| storage(&self.path, e))?;
        self.since_compaction = 0;
        Ok(())
    }
}

/// Sessions by id. Each session has its own lock, so requests for one
/// session are serialized while different sessions proceed in parallel.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    workers: Mutex<HashMap<String, String>>,
    log: Option<Mutex<EventLog>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            workers: Mutex::new(HashMap::new()),
            log: None,
        }
    }

    pub fn open(path: &Path, compact_every: usize) -> Result<Self> {
        let (log, sessions) = EventLog::open(path, compact_every)?;
        let mut workers = HashMap::new();
        let mut map = HashMap::new();
        for s in sessions {
            if let Some(w) = &s.record.worker_id {
                workers.insert(w.clone(), s.id().to_string());
            }
            map.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
        }
        Ok(SessionStore {
            sessions: RwLock::new(map),
            workers: Mutex::new(workers),
            log: Some(Mutex::new(log)),
        })
    }

    /// Persist and register a new session. With `unique_workers`, a worker
    /// id seen before is a conflict.
    pub fn insert(&self, session: Session, at_ms: u64, unique_workers: bool) -> Result<()> {
        let mut workers = self.workers.lock().expect("worker index poisoned");
        if let Some(w) = &session.record.worker_id {
            if unique_workers && workers.contains_key(w) {
                return Err(ServiceError::Conflict(format!("worker {w} already has a session")));
            }
        }
        if self.sessions.read().expect("session map poisoned").contains_key(session.id()) {
            return Err(ServiceError::Conflict(format!("session id {} is taken", session.id())));
        }
        self.persist(EventKind::Created, &session, at_ms)?;
        if let Some(w) = &session.record.worker_id {
            workers.entry(w.clone()).or_insert_with(|| session.id().to_string());
        }
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    pub fn persist(&self, kind: EventKind, session: &Session, at_ms: u64) -> Result<()> {
        match &self.log {
            Some(log) => log.lock().expect("event log poisoned").append(kind, session, at_ms),
            None => Ok(()),
        }
    }

    /// Copies of every session, oldest first.
    pub fn all(&self) -> Vec<Session> {
        let handles: Vec<_> = self.sessions.read().expect("session map poisoned").values().cloned().collect();
        let mut out: Vec<Session> = handles.iter().map(|h| h.lock().expect("session poisoned").clone()).collect();
        out.sort_by(|a, b| {
            (a.record.created_at_ms, a.id()).cmp(&(b.record.created_at_ms, b.id()))
        });
        out
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
