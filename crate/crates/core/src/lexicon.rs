//! Dictionary-based chemical entity recognition over a name→SMILES knowledge base.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// One knowledge-base row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbRow {
    pub name: String,
    pub smiles: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexEntry {
    pub canonical_smiles: String,
    pub preferred_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<char, usize>,
    terminal: bool,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, LexEntry>,
    nodes: Vec<TrieNode>,
}

/// Lowercase and collapse whitespace runs to one space, trimming the ends.
pub fn normalize(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub smiles: String,
    pub preferred_name: String,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            entries: HashMap::new(),
            nodes: vec![TrieNode::default()],
        }
    }
}

impl Lexicon {
    /// Build from rows; the first row for a name wins and rows whose SMILES
    /// does not parse are rejected. Row numbers in the report are 1-based.
    pub fn from_rows(rows: impl IntoIterator<Item = KbRow>) -> (Lexicon, LoadReport) {
        let mut lex = Lexicon::default();
        let mut report = LoadReport::default();
        for (i, row) in rows.into_iter().enumerate() {
            let key = normalize(&row.name);
            let reject = |reason: String| Rejection {
                line: i + 1,
                name: row.name.clone(),
                reason,
            };
            if key.is_empty() {
                report.rejected.push(reject("empty name".into()));
                continue;
            }
            let canonical = match smiles::parse(&row.smiles) {
                Ok(g) => smiles::canonical(&g),
                Err(e) => {
                    report.rejected.push(reject(format!("invalid smiles: {e}")));
                    continue;
                }
            };
            if let Some(existing) = lex.entries.get(&key) {
                let reason = if existing.canonical_smiles == canonical {
                    "duplicate name".to_string()
                } else {
                    format!("duplicate name, keeping {}", existing.canonical_smiles)
                };
                report.rejected.push(reject(reason));
                continue;
            }
            lex.insert_key(&key);
            lex.entries.insert(
                key,
                LexEntry {
                    canonical_smiles: canonical,
                    preferred_name: row.preferred_name.clone().unwrap_or(row.name.clone()),
                },
            );
            report.loaded += 1;
        }
        (lex, report)
    }

    fn insert_key(&mut self, key: &str) {
        let mut node = 0;
        for ch in key.chars() {
            node = match self.nodes[node].children.get(&ch) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(ch, next);
                    next
                }
            };
        }
        self.nodes[node].terminal = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&LexEntry> {
        self.entries.get(&normalize(name))
    }

    /// `(normalized name, entry)` pairs sorted by name.
    pub fn entries(&self) -> Vec<(&str, &LexEntry)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, e)| (k.as_str(), e)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

pub fn load_kb(path: &Path) -> Result<(Lexicon, LoadReport), LexiconError> {
    let io = |source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut rows = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let row: KbRow = serde_json::from_str(&line).map_err(|e| LexiconError::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(Lexicon::from_rows(rows))
}

/// Mentions of lexicon names at word boundaries, longest first then leftmost,
/// returned in text order with byte offsets into `text`.
pub fn recognize(text: &str, lex: &Lexicon) -> Vec<EntityMention> {
    // normalized characters with the original byte span each came from
    let mut chars: Vec<(char, usize, usize)> = Vec::new();
    let mut pending_space: Option<(usize, usize)> = None;
    for (pos, ch) in text.char_indices() {
        let end = pos + ch.len_utf8();
        if ch.is_whitespace() {
            pending_space = Some(pending_space.map_or((pos, end), |(s, _)| (s, end)));
            continue;
        }
        if let Some((s, e)) = pending_space.take() {
            if !chars.is_empty() {
                chars.push((' ', s, e));
            }
        }
        for lower in ch.to_lowercase() {
            chars.push((lower, pos, end));
        }
    }
    let is_word = |i: usize| chars.get(i).is_some_and(|c| c.0.is_alphanumeric());
    let mut found: Vec<(usize, usize)> = Vec::new();
    for start in 0..chars.len() {
        if start > 0 && is_word(start - 1) && is_word(start) {
            continue;
        }
        let mut node = 0;
        for (k, &(ch, _, _)) in chars.iter().enumerate().skip(start) {
            match lex.nodes[node].children.get(&ch) {
                Some(&next) => node = next,
                None => break,
            }
            if lex.nodes[node].terminal && !(is_word(k) && is_word(k + 1)) {
                found.push((start, k + 1));
            }
        }
    }
    found.sort_by_key(|&(s, e)| (std::cmp::Reverse(e - s), s));
    let mut taken = vec![false; chars.len()];
    let mut chosen = Vec::new();
    for (s, e) in found {
        if taken[s..e].iter().any(|t| *t) {
            continue;
        }
        taken[s..e].iter_mut().for_each(|t| *t = true);
        chosen.push((s, e));
    }
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|(s, e)| {
            let key: String = chars[s..e].iter().map(|c| c.0).collect();
            let entry = &lex.entries[&key];
            let (start, end) = (chars[s].1, chars[e - 1].2);
            EntityMention {
                start,
                end,
                surface: text[start..end].to_string(),
                smiles: entry.canonical_smiles.clone(),
                preferred_name: entry.preferred_name.clone(),
            }
        })
        .collect()
}
