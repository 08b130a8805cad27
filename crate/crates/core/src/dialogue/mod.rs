//! Multi-turn dialogue construction from molecule-description pairs.
//!
//! Each description is split into sentences, names are masked, the sentence
//! order is reversed and accumulated into turns, and every turn but the last
//! gets an intermediate molecule from a [`CandidateProvider`] that passes a
//! path-fingerprint similarity gate against the final molecule.

mod provider;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{fnv1a64, tanimoto, Fingerprint, FingerprintConfig};
use crate::smiles::{canonical, parse, MolecularGraph};

pub use provider::{
    CandidateProvider, EchoProvider, FnProvider, ProposalRequest, ProviderError, ReplayEntry,
    ReplayProvider,
};

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeDescriptionPair {
    pub id: String,
    pub smiles: String,
    pub description: String,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub k: usize,
    pub text: String,
    pub expected_molecule: String,
    pub sim_to_final: f64,
    pub low_sim_retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub provider: String,
    /// Path fingerprint of each turn's expected molecule, in turn order.
    pub candidate_fingerprints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<DialogueTurn>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuilderConfig {
    pub retain_prob: f64,
    pub gate_low: f64,
    pub gate_high: f64,
    pub candidates_k: usize,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            retain_prob: 0.05,
            gate_low: 0.5,
            gate_high: 1.0,
            candidates_k: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub input_pairs: usize,
    pub emitted: usize,
    /// Single-turn, dash and invalid pairs together.
    pub filtered: usize,
    pub filtered_single_turn: usize,
    pub filtered_dash: usize,
    pub invalid_pairs: usize,
    pub provider_failed: usize,
    /// Emitted dialogues by turn count.
    pub turn_histogram: BTreeMap<usize, usize>,
    pub intermediates_selected: usize,
    pub turns_dropped: usize,
    /// Times the similarity gate came up empty with a low-similarity fallback available.
    pub retention_draws: usize,
    pub low_sim_retained: usize,
}

impl BuildStats {
    fn merge(mut self, other: BuildStats) -> BuildStats {
        self.input_pairs += other.input_pairs;
        self.emitted += other.emitted;
        self.filtered += other.filtered;
        self.filtered_single_turn += other.filtered_single_turn;
        self.filtered_dash += other.filtered_dash;
        self.invalid_pairs += other.invalid_pairs;
        self.provider_failed += other.provider_failed;
        for (k, v) in other.turn_histogram {
            *self.turn_histogram.entry(k).or_default() += v;
        }
        self.intermediates_selected += other.intermediates_selected;
        self.turns_dropped += other.turns_dropped;
        self.retention_draws += other.retention_draws;
        self.low_sim_retained += other.low_sim_retained;
        self
    }
}

const ABBREVIATIONS: [&str; 3] = ["e.g.", "i.e.", "approx."];

fn ends_with_abbreviation(head: &str) -> bool {
    let lower = head.to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        lower.ends_with(abbr)
            && lower[..lower.len() - abbr.len()]
                .chars()
                .next_back()
                .is_none_or(|c| !c.is_alphanumeric())
    })
}

/// Split at '.', '!' or '?' followed by whitespace and an uppercase letter or digit.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j == i + 1 || j == chars.len() {
            continue;
        }
        let next = chars[j].1;
        if !(next.is_uppercase() || next.is_ascii_digit()) {
            continue;
        }
        let end = pos + c.len_utf8();
        if c == '.' && ends_with_abbreviation(&text[..end]) {
            continue;
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_string());
        }
        start = chars[j].0;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Byte length of the case-insensitive match of `name` at the start of `text`.
fn match_ci(text: &str, name: &str) -> Option<usize> {
    let mut t = text.char_indices();
    for n in name.chars() {
        let (_, c) = t.next()?;
        if !c.to_lowercase().eq(n.to_lowercase()) {
            return None;
        }
    }
    Some(t.next().map_or(text.len(), |(i, _)| i))
}

/// Replace every case-insensitive whole-word occurrence of any name with
/// "the molecule", longest names first.
pub fn replace_synonyms(text: &str, names: &[String]) -> String {
    let mut names: Vec<&str> = names
        .iter()
        .map(|n| n.trim())
        .filter(|n| !n.is_empty())
        .collect();
    names.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut prev: Option<char> = None;
    while i < text.len() {
        let rest = &text[i..];
        let at_boundary = prev.is_none_or(|c| !c.is_alphanumeric());
        let hit = at_boundary
            .then(|| {
                names.iter().find_map(|n| {
                    let len = match_ci(rest, n)?;
                    let after = rest[len..].chars().next();
                    after.is_none_or(|c| !c.is_alphanumeric()).then_some(len)
                })
            })
            .flatten();
        match hit {
            Some(len) => {
                out.push_str("the molecule");
                prev = rest[..len].chars().next_back();
                i += len;
            }
            None => {
                let c = rest.chars().next().expect("non-empty");
                out.push(c);
                prev = Some(c);
                i += c.len_utf8();
            }
        }
    }
    out
}

/// Reverse the sentences and accumulate: turn k holds the last k sentences.
pub fn build_turns(sentences: &[String]) -> Vec<String> {
    let reversed: Vec<&str> = sentences.iter().rev().map(String::as_str).collect();
    (1..=reversed.len())
        .map(|k| reversed[..k].join(" "))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub smiles: String,
    pub sim: f64,
    pub retained: bool,
}

struct GateOutcome {
    selection: Option<Selection>,
    retention_draw: bool,
}

/// Path fingerprints by SMILES string, shared across the pairs of one build.
#[derive(Default)]
struct FpCache {
    map: Mutex<HashMap<String, Option<Arc<Fingerprint>>>>,
}

impl FpCache {
    fn get(&self, smiles: &str, fp: &FingerprintConfig) -> Option<Arc<Fingerprint>> {
        if let Some(hit) = self.map.lock().expect("cache").get(smiles) {
            return hit.clone();
        }
        let value = parse(smiles).ok().map(|g| Arc::new(fp.path(&g)));
        self.map
            .lock()
            .expect("cache")
            .insert(smiles.to_string(), value.clone());
        value
    }
}

fn gate<R: Rng>(
    candidates: &[String],
    target: &Fingerprint,
    rng: &mut R,
    cfg: &BuilderConfig,
    fp: &FingerprintConfig,
    cache: &FpCache,
) -> GateOutcome {
    let scored: Vec<(&String, f64)> = candidates
        .iter()
        .filter_map(|c| {
            let f = cache.get(c, fp)?;
            Some((c, tanimoto(&f, target).expect("same parameters")))
        })
        .collect();
    let eligible: Vec<&(&String, f64)> = scored
        .iter()
        .filter(|(_, s)| *s >= cfg.gate_low && *s < cfg.gate_high)
        .collect();
    if !eligible.is_empty() {
        let (smiles, sim) = eligible[rng.gen_range(0..eligible.len())];
        return GateOutcome {
            selection: Some(Selection {
                smiles: smiles.to_string(),
                sim: *sim,
                retained: false,
            }),
            retention_draw: false,
        };
    }
    let fallback = scored.iter().filter(|(_, s)| *s < cfg.gate_low).fold(
        None::<&(&String, f64)>,
        |best, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        },
    );
    let Some((smiles, sim)) = fallback else {
        return GateOutcome {
            selection: None,
            retention_draw: false,
        };
    };
    let keep = rng.gen_bool(cfg.retain_prob.clamp(0.0, 1.0));
    GateOutcome {
        selection: keep.then(|| Selection {
            smiles: smiles.to_string(),
            sim: *sim,
            retained: true,
        }),
        retention_draw: true,
    }
}

/// Pick an intermediate molecule among valid candidates whose path-fingerprint
/// similarity to `final_mol` lies in `[gate_low, gate_high)`. When none does,
/// keep the most similar lower candidate with probability `retain_prob`.
pub fn select_intermediate<R: Rng>(
    candidates: &[String],
    final_mol: &MolecularGraph,
    rng: &mut R,
    cfg: &BuilderConfig,
    fp: &FingerprintConfig,
) -> Option<Selection> {
    gate(
        candidates,
        &fp.path(final_mol),
        rng,
        cfg,
        fp,
        &FpCache::default(),
    )
    .selection
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterReason {
    SingleTurn,
    Dash,
}

pub fn filter_reason(d: &Dialogue) -> Option<FilterReason> {
    if d.turns.len() < 2 {
        Some(FilterReason::SingleTurn)
    } else if d.turns.iter().any(|t| t.text.contains('-')) {
        Some(FilterReason::Dash)
    } else {
        None
    }
}

/// Drop dialogues with fewer than two turns or any '-' in a turn text.
pub fn apply_filters(d: Dialogue) -> Option<Dialogue> {
    filter_reason(&d).is_none().then_some(d)
}

fn pair_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(id.as_bytes());
    ChaCha8Rng::seed_from_u64(fnv1a64(&bytes))
}

fn build_pair(
    pair: &MoleculeDescriptionPair,
    provider: &dyn CandidateProvider,
    cfg: &BuilderConfig,
    fp: &FingerprintConfig,
    seed: u64,
    cache: &FpCache,
) -> (Option<Dialogue>, BuildStats) {
    let mut stats = BuildStats {
        input_pairs: 1,
        ..BuildStats::default()
    };
    let final_mol = match parse(&pair.smiles) {
        Ok(g) if !pair.description.trim().is_empty() => g,
        _ => {
            stats.invalid_pairs = 1;
            stats.filtered = 1;
            return (None, stats);
        }
    };
    let target = fp.path(&final_mol);
    let mut rng = pair_rng(seed, &pair.id);
    let sentences: Vec<String> = split_sentences(&pair.description)
        .iter()
        .map(|s| replace_synonyms(s, &pair.names))
        .collect();
    let texts = build_turns(&sentences);
    let mut turns: Vec<(String, String, f64, bool)> = Vec::new();
    for (k, text) in texts[..texts.len() - 1].iter().enumerate() {
        let request = ProposalRequest {
            pair_id: &pair.id,
            turn: k + 1,
            text,
            k: cfg.candidates_k,
        };
        let candidates = match provider.propose(&request) {
            Ok(c) => c,
            Err(_) => {
                return (
                    None,
                    BuildStats {
                        input_pairs: 1,
                        provider_failed: 1,
                        ..BuildStats::default()
                    },
                )
            }
        };
        let limit = candidates.len().min(cfg.candidates_k);
        let outcome = gate(&candidates[..limit], &target, &mut rng, cfg, fp, cache);
        stats.retention_draws += usize::from(outcome.retention_draw);
        match outcome.selection {
            Some(s) => {
                stats.intermediates_selected += 1;
                stats.low_sim_retained += usize::from(s.retained);
                turns.push((text.clone(), s.smiles, s.sim, s.retained));
            }
            None => stats.turns_dropped += 1,
        }
    }
    let final_text = texts.last().expect("description has a sentence").clone();
    turns.push((final_text, canonical(&final_mol), 1.0, false));
    let fingerprints = turns
        .iter()
        .map(|(_, smiles, _, _)| {
            cache
                .get(smiles, fp)
                .expect("gated molecules parse")
                .to_hex()
        })
        .collect();
    let dialogue = Dialogue {
        id: pair.id.clone(),
        turns: turns
            .into_iter()
            .enumerate()
            .map(|(i, (text, smiles, sim, retained))| DialogueTurn {
                k: i + 1,
                text,
                expected_molecule: smiles,
                sim_to_final: sim,
                low_sim_retained: retained,
            })
            .collect(),
        provenance: Provenance {
            seed,
            provider: provider.id(),
            candidate_fingerprints: fingerprints,
        },
    };
    match filter_reason(&dialogue) {
        Some(reason) => {
            stats.filtered = 1;
            match reason {
                FilterReason::SingleTurn => stats.filtered_single_turn = 1,
                FilterReason::Dash => stats.filtered_dash = 1,
            }
            (None, stats)
        }
        None => {
            stats.emitted = 1;
            stats.turn_histogram.insert(dialogue.turns.len(), 1);
            (Some(dialogue), stats)
        }
    }
}

/// Build the dialogue dataset. Output is sorted by pair id and does not depend
/// on thread scheduling.
pub fn build_dataset(
    pairs: &[MoleculeDescriptionPair],
    provider: &dyn CandidateProvider,
    cfg: &BuilderConfig,
    fp: &FingerprintConfig,
    seed: u64,
) -> (Vec<Dialogue>, BuildStats) {
    let cache = FpCache::default();
    let results: Vec<(Option<Dialogue>, BuildStats)> = pairs
        .par_iter()
        .map(|p| build_pair(p, provider, cfg, fp, seed, &cache))
        .collect();
    let mut stats = BuildStats::default();
    let mut dialogues = Vec::new();
    for (d, s) in results {
        stats = stats.merge(s);
        dialogues.extend(d);
    }
    dialogues.sort_by(|a, b| a.id.cmp(&b.id));
    (dialogues, stats)
}

/// Invariant violations of an emitted dialogue, empty when it is well formed.
pub fn check_dialogue(
    d: &Dialogue,
    pair: &MoleculeDescriptionPair,
    cfg: &BuilderConfig,
    fp: &FingerprintConfig,
) -> Vec<String> {
    let mut errs = Vec::new();
    if let Some(reason) = filter_reason(d) {
        errs.push(format!("filterable: {reason:?}"));
    }
    for (i, t) in d.turns.iter().enumerate() {
        if t.k != i + 1 {
            errs.push(format!("turn {} numbered {}", i + 1, t.k));
        }
        if let Some(next) = d.turns.get(i + 1) {
            if !next.text.starts_with(&format!("{} ", t.text)) {
                errs.push(format!("turn {} is not a prefix of the next", t.k));
            }
            if !t.low_sim_retained
                && !(t.sim_to_final >= cfg.gate_low && t.sim_to_final < cfg.gate_high)
            {
                errs.push(format!(
                    "turn {} similarity {} outside gate",
                    t.k, t.sim_to_final
                ));
            }
        }
    }
    match (d.turns.last(), parse(&pair.smiles)) {
        (Some(last), Ok(g)) => {
            let same = parse(&last.expected_molecule)
                .map(|m| canonical(&m) == canonical(&g))
                .unwrap_or(false);
            if !same || last.sim_to_final != 1.0 {
                errs.push("final turn does not hold the pair molecule".into());
            }
            for t in &d.turns[..d.turns.len() - 1] {
                match parse(&t.expected_molecule) {
                    Ok(m) => {
                        let s = tanimoto(&fp.path(&m), &fp.path(&g)).expect("same parameters");
                        if (s - t.sim_to_final).abs() > 1e-12 {
                            errs.push(format!("turn {} similarity mismatch", t.k));
                        }
                    }
                    Err(_) => errs.push(format!("turn {} molecule invalid", t.k)),
                }
            }
        }
        _ => errs.push("no turns or invalid pair".into()),
    }
    errs
}

const TOY_PAIRS: &str = include_str!("../../data/toy_pairs.jsonl");

/// The bundled toy corpus of molecule-description pairs.
pub fn bundled_pairs() -> Vec<MoleculeDescriptionPair> {
    TOY_PAIRS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled pairs are well formed"))
        .collect()
}

pub fn read_pairs(path: &Path) -> Result<Vec<MoleculeDescriptionPair>, DialogueError> {
    read_jsonl(path)
}

pub fn read_dialogues(path: &Path) -> Result<Vec<Dialogue>, DialogueError> {
    read_jsonl(path)
}

/// Read any JSON-lines file of records.
pub fn read_jsonl_records<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<T>, DialogueError> {
    read_jsonl(path)
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<T>, DialogueError> {
    let text = fs::read_to_string(path).map_err(|source| DialogueError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| DialogueError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}
