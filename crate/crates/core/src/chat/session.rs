use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatSession};
use crate::clock::Timestamp;

/// A session shared between requests. Holding its lock for a whole turn
/// serializes turns within one session.
pub type SharedSession = Arc<tokio::sync::Mutex<ChatSession>>;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Session { id: String, created_at: Timestamp },
    Message(ChatMessage),
}

/// In-memory sessions, optionally backed by one append-only JSON-lines file
/// per session.
#[derive(Debug)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, SharedSession>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self { dir: None, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn persistent(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), sessions: Mutex::new(HashMap::new()) })
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn map(&self) -> std::sync::MutexGuard<'_, HashMap<String, SharedSession>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create(&self, created_at: Timestamp) -> std::io::Result<SharedSession> {
        let id = uuid::Uuid::new_v4().to_string();
        if let Some(path) = self.path(&id) {
            let mut f = OpenOptions::new().create_new(true).write(true).open(path)?;
            write_line(&mut f, &Line::Session { id: id.clone(), created_at })?;
        }
        let shared = Arc::new(tokio::sync::Mutex::new(ChatSession::new(id.clone(), created_at)));
        self.map().insert(id, shared.clone());
        Ok(shared)
    }

    /// Looks a session up in memory, then on disk.
    pub fn get(&self, id: &str) -> std::io::Result<Option<SharedSession>> {
        if !valid_id(id) {
            return Ok(None);
        }
        if let Some(s) = self.map().get(id) {
            return Ok(Some(s.clone()));
        }
        let Some(path) = self.path(id) else {
            return Ok(None);
        };
        let Some(session) = load(&path)? else {
            return Ok(None);
        };
        let shared = Arc::new(tokio::sync::Mutex::new(session));
        Ok(Some(self.map().entry(id.to_owned()).or_insert(shared).clone()))
    }

    /// Persists messages already pushed onto `session` (the last `count`).
    pub fn append(&self, session: &ChatSession, count: usize) -> std::io::Result<()> {
        let Some(path) = self.path(&session.id) else {
            return Ok(());
        };
        let mut f = OpenOptions::new().append(true).open(path)?;
        let start = session.messages.len().saturating_sub(count);
        let mut buf = Vec::new();
        for m in &session.messages[start..] {
            serde_json::to_writer(&mut buf, &Line::Message(m.clone())).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        f.write_all(&buf)?;
        f.sync_data()
    }

    pub fn len(&self) -> usize {
        self.map().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn write_line(f: &mut File, line: &Line) -> std::io::Result<()> {
    let mut buf = serde_json::to_vec(line).map_err(std::io::Error::other)?;
    buf.push(b'\n');
    f.write_all(&buf)?;
    f.sync_data()
}

fn load(path: &Path) -> std::io::Result<Option<ChatSession>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut session: Option<ChatSession> = None;
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = match serde_json::from_str(&line) {
            Ok(l) => l,
            // A crash mid-write can leave a torn last line; keep what came before.
            Err(e) => {
                log::warn!("{}:{}: skipping unreadable session line: {e}", path.display(), n + 1);
                continue;
            }
        };
        match (parsed, session.as_mut()) {
            (Line::Session { id, created_at }, None) => session = Some(ChatSession::new(id, created_at)),
            (Line::Message(m), Some(s)) => s.messages.push(m),
            _ => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: unexpected line", path.display(), n + 1),
                ))
            }
        }
    }
    Ok(session)
}
