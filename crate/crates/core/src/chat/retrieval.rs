use std::collections::HashSet;

use super::tfidf::TfIdf;
use super::{Backend, BackendError, ChatError, Generated};
use crate::dialogue::{CandidateProvider, MoleculeDescriptionPair, ProposalRequest, ProviderError};
use crate::fingerprint::{tanimoto, Fingerprint, FingerprintConfig};
use crate::smiles::{canonical, parse};

struct Entry {
    smiles: String,
    canonical: Option<String>,
    morgan: Option<Fingerprint>,
    description: String,
}

/// Trainless baseline: TF-IDF over descriptions for generation, Morgan
/// nearest neighbor for understanding.
pub struct RetrievalBackend {
    id: String,
    fp: FingerprintConfig,
    entries: Vec<Entry>,
    index: TfIdf,
}

pub fn retrieval_index(
    corpus: &[MoleculeDescriptionPair],
    fp: FingerprintConfig,
) -> Result<RetrievalBackend, ChatError> {
    if corpus.is_empty() {
        return Err(ChatError::EmptyCorpus);
    }
    let entries = corpus
        .iter()
        .map(|p| {
            let g = parse(&p.smiles).ok();
            Entry {
                smiles: p.smiles.clone(),
                canonical: g.as_ref().map(canonical),
                morgan: g.as_ref().map(|g| fp.morgan(g)),
                description: p.description.clone(),
            }
        })
        .collect();
    Ok(RetrievalBackend {
        id: "retrieval".into(),
        fp,
        entries,
        index: TfIdf::build(corpus.iter().map(|p| p.description.as_str())),
    })
}

impl RetrievalBackend {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct molecules ranked by description cosine (ties by corpus order).
    pub fn ranked(&self, query: &str) -> Vec<(String, f64)> {
        let scores = self.index.scores(query);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut seen = HashSet::new();
        order
            .into_iter()
            .filter(|&i| {
                let e = &self.entries[i];
                seen.insert(e.canonical.clone().unwrap_or_else(|| e.smiles.clone()))
            })
            .map(|i| (self.entries[i].smiles.clone(), scores[i]))
            .collect()
    }
}

impl Backend for RetrievalBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn understand(&self, smiles: &str) -> Result<String, BackendError> {
        let g = parse(smiles).map_err(|e| BackendError::Failed(format!("invalid SMILES: {e}")))?;
        let key = canonical(&g);
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| e.canonical.as_deref() == Some(&key))
        {
            return Ok(e.description.clone());
        }
        let query = self.fp.morgan(&g);
        let mut best: Option<(f64, &Entry)> = None;
        for e in &self.entries {
            let Some(m) = &e.morgan else { continue };
            let s = tanimoto(&query, m).expect("same parameters");
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, e));
            }
        }
        best.map(|(_, e)| e.description.clone())
            .ok_or_else(|| BackendError::Failed("corpus has no valid molecules".into()))
    }

    fn generate(&self, query: &str, k: usize) -> Result<Generated, BackendError> {
        let ranked: Vec<String> = self
            .ranked(query)
            .into_iter()
            .take(k.max(1))
            .map(|(s, _)| s)
            .collect();
        Generated::fit(ranked, k)
    }
}

impl CandidateProvider for RetrievalBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn propose(&self, r: &ProposalRequest<'_>) -> Result<Vec<String>, ProviderError> {
        Ok(self
            .ranked(r.text)
            .into_iter()
            .take(r.k)
            .map(|(s, _)| s)
            .collect())
    }
}
