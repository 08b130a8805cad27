use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{read_jsonl, DialogueError, MoleculeDescriptionPair};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no candidates recorded for {id} turn {turn}")]
    Missing { id: String, turn: usize },
    #[error("provider failed: {0}")]
    Failed(String),
}

/// What a provider sees when asked for intermediate candidates.
#[derive(Debug, Clone, Copy)]
pub struct ProposalRequest<'a> {
    pub pair_id: &'a str,
    /// 1-based turn index.
    pub turn: usize,
    pub text: &'a str,
    pub k: usize,
}

pub trait CandidateProvider: Sync {
    fn id(&self) -> String;
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<Vec<String>, ProviderError>;
}

/// Proposes the pair's own final molecule for every turn.
pub struct EchoProvider {
    finals: HashMap<String, String>,
}

impl EchoProvider {
    pub fn new(pairs: &[MoleculeDescriptionPair]) -> Self {
        EchoProvider {
            finals: pairs
                .iter()
                .map(|p| (p.id.clone(), p.smiles.clone()))
                .collect(),
        }
    }
}

impl CandidateProvider for EchoProvider {
    fn id(&self) -> String {
        "echo".into()
    }

    fn propose(&self, r: &ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> {
        let smiles = self.finals.get(r.pair_id).ok_or(ProviderError::Missing {
            id: r.pair_id.to_string(),
            turn: r.turn,
        })?;
        Ok(vec![smiles.clone(); r.k.max(1)])
    }
}

/// Wraps a closure.
pub struct FnProvider<F> {
    id: String,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnProvider { id: id.into(), f }
    }
}

impl<F> CandidateProvider for FnProvider<F>
where
    F: Fn(&ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> + Sync,
{
    fn id(&self) -> String {
        self.id.clone()
    }

    fn propose(&self, r: &ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> {
        (self.f)(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub id: String,
    pub turn: usize,
    pub candidates: Vec<String>,
}

/// Replays candidates recorded elsewhere, keyed by pair id and turn.
pub struct ReplayProvider {
    name: String,
    entries: HashMap<(String, usize), Vec<String>>,
}

impl ReplayProvider {
    pub fn from_entries(name: impl Into<String>, entries: Vec<ReplayEntry>) -> Self {
        ReplayProvider {
            name: name.into(),
            entries: entries
                .into_iter()
                .map(|e| ((e.id, e.turn), e.candidates))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, DialogueError> {
        let name = format!(
            "replay:{}",
            path.file_name().unwrap_or_default().to_string_lossy()
        );
        Ok(Self::from_entries(name, read_jsonl(path)?))
    }
}

impl CandidateProvider for ReplayProvider {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn propose(&self, r: &ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> {
        self.entries
            .get(&(r.pair_id.to_string(), r.turn))
            .cloned()
            .ok_or(ProviderError::Missing {
                id: r.pair_id.to_string(),
                turn: r.turn,
            })
    }
}
