//! Conversation state: sessions with an append-only event history,
//! understanding and generation turns, and pluggable backends.

mod remote;
mod retrieval;
pub mod tfidf;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{tanimoto, FingerprintConfig};
use crate::smiles::{parse, ParseError};

pub use remote::{remote_backend, RemoteBackend};
pub use retrieval::{retrieval_index, RetrievalBackend};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("backend failed: {0}")]
    Failed(String),
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("history holds no user text")]
    NoText,
    #[error("turn text is empty")]
    EmptyText,
    #[error("invalid SMILES: {0}")]
    InvalidSmiles(#[from] ParseError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no earlier candidate set to choose from")]
    NothingToChoose,
    #[error("choice {index} out of range for {len} candidates")]
    ChoiceOutOfRange { index: usize, len: usize },
    #[error("retrieval corpus is empty")]
    EmptyCorpus,
    #[error("session log: {0}")]
    Io(#[from] std::io::Error),
    #[error("session log line {line}: {message}")]
    Log { line: usize, message: String },
}

/// Backend output padded or truncated to exactly `k` strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub candidates: Vec<String>,
    pub padded: bool,
}

impl Generated {
    pub fn fit(mut candidates: Vec<String>, k: usize) -> Result<Generated, BackendError> {
        let first = candidates
            .first()
            .cloned()
            .ok_or_else(|| BackendError::Protocol("no candidates".into()))?;
        let k = k.max(1);
        let padded = candidates.len() < k;
        candidates.resize(k, first);
        Ok(Generated { candidates, padded })
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn understand(&self, smiles: &str) -> Result<String, BackendError>;
    fn generate(&self, query: &str, k: usize) -> Result<Generated, BackendError>;
}

/// Always returns the same molecule and description.
pub struct FixedBackend {
    pub id: String,
    pub smiles: Vec<String>,
    pub description: String,
}

impl Backend for FixedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn understand(&self, _smiles: &str) -> Result<String, BackendError> {
        Ok(self.description.clone())
    }

    fn generate(&self, _query: &str, k: usize) -> Result<Generated, BackendError> {
        Generated::fit(self.smiles.clone(), k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Molecule,
    Text,
    /// The user picked a candidate of the previous generation turn.
    Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub smiles: String,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_to_prev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub chosen: Option<usize>,
    pub padded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub role: Role,
    pub kind: EventKind,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    /// Backend query that produced a system molecule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateSet>,
    /// Candidate index for choice events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl Event {
    fn new(seq: u64, role: Role, kind: EventKind, content: String) -> Event {
        Event {
            seq,
            role,
            kind,
            content,
            valid: None,
            query: None,
            candidates: None,
            index: None,
        }
    }
}

/// First line of a session log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session: String,
    pub backend: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatSession {
    header: SessionHeader,
    events: Vec<Event>,
}

impl ChatSession {
    pub fn new(
        id: impl Into<String>,
        backend: impl Into<String>,
        created_at: impl Into<String>,
    ) -> Self {
        ChatSession {
            header: SessionHeader {
                session: id.into(),
                backend: backend.into(),
                created_at: created_at.into(),
            },
            events: Vec::new(),
        }
    }

    /// New session stamped with the current UTC time.
    pub fn start(id: impl Into<String>, backend: impl Into<String>) -> Self {
        Self::new(id, backend, chrono::Utc::now().to_rfc3339())
    }

    pub fn id(&self) -> &str {
        &self.header.session
    }

    pub fn backend(&self) -> &str {
        &self.header.backend
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn next_seq(&self) -> u64 {
        self.events.last().map_or(1, |e| e.seq + 1)
    }

    /// Candidate set of the latest generation turn.
    pub fn last_candidates(&self) -> Option<&CandidateSet> {
        self.events.iter().rev().find_map(|e| e.candidates.as_ref())
    }

    /// Header line followed by one line per event.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("serializable");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<ChatSession, ChatError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| ChatError::Log {
            line: line + 1,
            message: e.to_string(),
        };
        let (i, first) = lines.next().ok_or(ChatError::Log {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: SessionHeader = serde_json::from_str(first).map_err(|e| bad(i, e))?;
        let mut events: Vec<Event> = Vec::new();
        for (i, l) in lines {
            let e: Event = serde_json::from_str(l).map_err(|e| bad(i, e))?;
            if events.last().is_some_and(|p| p.seq >= e.seq) {
                return Err(ChatError::Log {
                    line: i + 1,
                    message: "sequence numbers not increasing".into(),
                });
            }
            events.push(e);
        }
        Ok(ChatSession { header, events })
    }
}

/// The molecule an "It looks like" sentence refers to: the latest user
/// choice or system molecule.
fn previous_molecule(events: &[Event]) -> Option<&str> {
    events.iter().rev().find_map(|e| match (e.role, e.kind) {
        (Role::System, EventKind::Molecule) | (Role::User, EventKind::Choice) => {
            Some(e.content.as_str())
        }
        _ => None,
    })
}

/// All user texts in order, then "It looks like <M>." for the previous molecule.
pub fn compose_generation_query(history: &[Event]) -> Result<String, ChatError> {
    let texts: Vec<&str> = history
        .iter()
        .filter(|e| e.role == Role::User && e.kind == EventKind::Text)
        .map(|e| e.content.as_str())
        .collect();
    if texts.is_empty() {
        return Err(ChatError::NoText);
    }
    let mut query = texts.join(" ");
    if let Some(m) = previous_molecule(history) {
        query.push_str(&format!(" It looks like {m}."));
    }
    Ok(query)
}

/// Text turn: compose the query, ask the backend for `k` candidates and commit
/// the rank-1 molecule. `choose` selects a candidate of the previous turn as the
/// molecule to refine. Nothing is committed on error.
pub fn generate_turn(
    session: &mut ChatSession,
    backend: &dyn Backend,
    text: &str,
    k: usize,
    choose: Option<usize>,
    fp: &FingerprintConfig,
) -> Result<CandidateSet, ChatError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ChatError::EmptyText);
    }
    let mut pending = Vec::new();
    let mut seq = session.next_seq();
    if let Some(index) = choose {
        let set = session
            .last_candidates()
            .ok_or(ChatError::NothingToChoose)?;
        let c = set
            .candidates
            .get(index)
            .ok_or(ChatError::ChoiceOutOfRange {
                index,
                len: set.candidates.len(),
            })?;
        let mut e = Event::new(seq, Role::User, EventKind::Choice, c.smiles.clone());
        e.valid = Some(c.valid);
        e.index = Some(index);
        pending.push(e);
        seq += 1;
    }
    pending.push(Event::new(
        seq,
        Role::User,
        EventKind::Text,
        text.to_string(),
    ));
    seq += 1;
    let history: Vec<Event> = session.events.iter().chain(&pending).cloned().collect();
    let query = compose_generation_query(&history)?;
    let generated = backend.generate(&query, k)?;
    let prev = previous_molecule(&history).map(|m| parse(m).ok().map(|g| fp.path(&g)));
    let candidates: Vec<Candidate> = generated
        .candidates
        .iter()
        .map(|s| {
            let g = parse(s).ok();
            let sim_to_prev = prev.as_ref().map(|p| match (p, &g) {
                (Some(p), Some(g)) => tanimoto(p, &fp.path(g)).expect("same parameters"),
                _ => 0.0,
            });
            Candidate {
                smiles: s.clone(),
                valid: g.is_some(),
                sim_to_prev,
            }
        })
        .collect();
    let set = CandidateSet {
        candidates,
        chosen: Some(0),
        padded: generated.padded,
    };
    let top = &set.candidates[0];
    let mut e = Event::new(seq, Role::System, EventKind::Molecule, top.smiles.clone());
    e.valid = Some(top.valid);
    e.query = Some(query);
    e.candidates = Some(set.clone());
    pending.push(e);
    session.events.extend(pending);
    Ok(set)
}

/// Molecule turn: validate, ask the backend for a description, commit both.
pub fn understand_turn(
    session: &mut ChatSession,
    backend: &dyn Backend,
    smiles: &str,
) -> Result<String, ChatError> {
    let smiles = smiles.trim();
    parse(smiles)?;
    let description = backend.understand(smiles)?;
    let seq = session.next_seq();
    let mut user = Event::new(seq, Role::User, EventKind::Molecule, smiles.to_string());
    user.valid = Some(true);
    session.events.push(user);
    session.events.push(Event::new(
        seq + 1,
        Role::System,
        EventKind::Text,
        description.clone(),
    ));
    Ok(description)
}

/// Append-only JSONL writer that mirrors a session's events as they are committed.
pub struct SessionLog {
    out: BufWriter<File>,
    written: usize,
}

impl SessionLog {
    pub fn create(path: &Path, session: &ChatSession) -> Result<SessionLog, ChatError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(
            out,
            "{}",
            serde_json::to_string(session.header()).expect("serializable")
        )?;
        let mut log = SessionLog { out, written: 0 };
        log.sync(session)?;
        Ok(log)
    }

    /// Write events not yet in the file.
    pub fn sync(&mut self, session: &ChatSession) -> Result<(), ChatError> {
        for e in &session.events()[self.written..] {
            writeln!(
                self.out,
                "{}",
                serde_json::to_string(e).expect("serializable")
            )?;
        }
        self.written = session.events().len();
        self.out.flush()?;
        Ok(())
    }
}
