//! In-memory session store with an optional append-only JSONL log.
//!
//! Each session sits behind its own async mutex, so turns of one session
//! run one at a time while different sessions proceed concurrently.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use hetqa_core::sr::Conversation;

use crate::views::{SessionView, TurnView};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session log {path}:{line}: {message}")]
    Log {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub conversation: Conversation,
    /// One view per conversation turn.
    pub turns: Vec<TurnView>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl Session {
    fn new(id: String, now: u64) -> Self {
        Self {
            conversation: Conversation::with_id(id.clone()),
            id,
            turns: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
            turns: self.turns.clone(),
        }
    }

    /// Appends a finished turn; the history receives the predicted answer.
    pub fn record(&mut self, view: TurnView, now: u64) {
        let (label, id) = view.history_answer();
        self.conversation.push(view.question.clone(), label, id);
        self.turns.push(view);
        self.updated_at = now;
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogEvent {
    Create {
        session_id: String,
        at: u64,
    },
    Turn {
        session_id: String,
        at: u64,
        view: Box<TurnView>,
    },
    Delete {
        session_id: String,
        at: u64,
    },
}

pub type SessionHandle = Arc<tokio::sync::Mutex<Session>>;

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    log: Option<Mutex<File>>,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays `path` if it exists, then appends every change to it.
    pub fn persistent(path: &Path) -> Result<Self, SessionError> {
        let mut sessions: HashMap<String, Session> = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: LogEvent =
                    serde_json::from_str(&line).map_err(|e| SessionError::Log {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                match event {
                    LogEvent::Create { session_id, at } => {
                        sessions.insert(session_id.clone(), Session::new(session_id, at));
                    }
                    LogEvent::Turn {
                        session_id,
                        at,
                        view,
                    } => match sessions.get_mut(&session_id) {
                        Some(s) => s.record(*view, at),
                        None => log::warn!(
                            "session log line {}: turn for unknown session {session_id}",
                            i + 1
                        ),
                    },
                    LogEvent::Delete { session_id, .. } => {
                        sessions.remove(&session_id);
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let sessions = sessions
            .into_iter()
            .map(|(k, s)| (k, Arc::new(tokio::sync::Mutex::new(s))))
            .collect();
        Ok(Self {
            sessions: RwLock::new(sessions),
            log: Some(Mutex::new(file)),
        })
    }

    fn append(&self, event: &LogEvent) {
        if let Some(file) = &self.log {
            let mut line = serde_json::to_string(event).expect("log events serialize");
            line.push('\n');
            let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
            if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
                log::error!("cannot append to session log: {e}");
            }
        }
    }

    pub fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        let at = now();
        self.sessions.write().unwrap().insert(
            id.clone(),
            Arc::new(tokio::sync::Mutex::new(Session::new(id.clone(), at))),
        );
        self.append(&LogEvent::Create {
            session_id: id.clone(),
            at,
        });
        id
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    pub fn delete(&self, id: &str) -> bool {
        let removed = self.sessions.write().unwrap().remove(id).is_some();
        if removed {
            self.append(&LogEvent::Delete {
                session_id: id.to_string(),
                at: now(),
            });
        }
        removed
    }

    /// Records a turn on an already locked session and logs it.
    pub fn record_turn(&self, session: &mut Session, view: TurnView) {
        let at = now();
        self.append(&LogEvent::Turn {
            session_id: session.id.clone(),
            at,
            view: Box::new(view.clone()),
        });
        session.record(view, at);
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
