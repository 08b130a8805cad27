//! Multi-task pre-training records: span-corruption MLM on text and SMILES,
//! property prediction, spatial-structure questions, name/text/SMILES
//! mapping, entity prompts and dual augmentation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::Backend;
use crate::dialogue::MoleculeDescriptionPair;
use crate::fingerprint::fnv1a64;
use crate::lexicon::{recognize, Lexicon};
use crate::smiles::{canonical, parse, MolecularGraph, ParseError};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid SMILES {smiles:?}: {source}")]
    InvalidSmiles { smiles: String, source: ParseError },
    #[error("augmentation pool overlaps evaluation references: {}", ids.join(", "))]
    Overlap { ids: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "mlm_text")]
    MlmText,
    #[serde(rename = "mlm_smiles")]
    MlmSmiles,
    #[serde(rename = "property")]
    Property,
    #[serde(rename = "spatial")]
    Spatial,
    #[serde(rename = "map_name2smiles")]
    MapName2Smiles,
    #[serde(rename = "map_smiles2name")]
    MapSmiles2Name,
    #[serde(rename = "map_text2smiles")]
    MapText2Smiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropertyName {
    Solubility,
    #[serde(rename = "Color/Form")]
    ColorForm,
    #[serde(rename = "Boiling Point")]
    BoilingPoint,
    #[serde(rename = "Flash Point")]
    FlashPoint,
    Density,
    #[serde(rename = "Vapor Density")]
    VaporDensity,
    Decomposition,
    Corrosivity,
    #[serde(rename = "Melting Point")]
    MeltingPoint,
    LogP,
    #[serde(rename = "Vapor Pressure")]
    VaporPressure,
    #[serde(rename = "Stability/Shelf Life")]
    StabilityShelfLife,
    Odor,
    Taste,
    #[serde(rename = "pH")]
    Ph,
}

impl PropertyName {
    pub const ALL: [PropertyName; 15] = [
        PropertyName::Solubility,
        PropertyName::ColorForm,
        PropertyName::BoilingPoint,
        PropertyName::FlashPoint,
        PropertyName::Density,
        PropertyName::VaporDensity,
        PropertyName::Decomposition,
        PropertyName::Corrosivity,
        PropertyName::MeltingPoint,
        PropertyName::LogP,
        PropertyName::VaporPressure,
        PropertyName::StabilityShelfLife,
        PropertyName::Odor,
        PropertyName::Taste,
        PropertyName::Ph,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PropertyName::Solubility => "Solubility",
            PropertyName::ColorForm => "Color/Form",
            PropertyName::BoilingPoint => "Boiling Point",
            PropertyName::FlashPoint => "Flash Point",
            PropertyName::Density => "Density",
            PropertyName::VaporDensity => "Vapor Density",
            PropertyName::Decomposition => "Decomposition",
            PropertyName::Corrosivity => "Corrosivity",
            PropertyName::MeltingPoint => "Melting Point",
            PropertyName::LogP => "LogP",
            PropertyName::VaporPressure => "Vapor Pressure",
            PropertyName::StabilityShelfLife => "Stability/Shelf Life",
            PropertyName::Odor => "Odor",
            PropertyName::Taste => "Taste",
            PropertyName::Ph => "pH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyItem {
    pub property_name: PropertyName,
    pub value_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: TaskKind,
    pub prefix: String,
    pub input: String,
    pub target: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub const FILL_PREFIX: &str = "Fill:";
pub const SPATIAL_PREFIX: &str = "Spatial:";
pub const NAME2SMILES_PREFIX: &str = "Name to SMILES:";
pub const SMILES2NAME_PREFIX: &str = "SMILES to name:";
pub const TEXT2SMILES_PREFIX: &str = "Text to SMILES:";

pub fn property_prefix(p: PropertyName) -> String {
    format!("Predict {}:", p.label())
}

/// True when `prefix` is the table entry for `task`.
pub fn prefix_matches(task: TaskKind, prefix: &str) -> bool {
    match task {
        TaskKind::MlmText | TaskKind::MlmSmiles => prefix == FILL_PREFIX,
        TaskKind::Property => PropertyName::ALL
            .iter()
            .any(|&p| property_prefix(p) == prefix),
        TaskKind::Spatial => prefix == SPATIAL_PREFIX,
        TaskKind::MapName2Smiles => prefix == NAME2SMILES_PREFIX,
        TaskKind::MapSmiles2Name => prefix == SMILES2NAME_PREFIX,
        TaskKind::MapText2Smiles => prefix == TEXT2SMILES_PREFIX,
    }
}

fn record(task: TaskKind, prefix: &str, input: String, target: String) -> TaskRecord {
    TaskRecord {
        task,
        prefix: prefix.to_string(),
        input,
        target,
        meta: BTreeMap::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub corrupt_ratio: f64,
    pub mean_span: f64,
    pub mark_ratio: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            corrupt_ratio: 0.15,
            mean_span: 3.0,
            mark_ratio: 0.15,
        }
    }
}

/// SMILES tokens: single characters, except Cl, Br and whole bracket atoms.
pub fn smiles_tokens(smiles: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = smiles.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '[' => {
                let end = smiles[i..].find(']').map_or(smiles.len(), |j| i + j + 1);
                out.push(smiles[i..end].to_string());
                while chars.peek().is_some_and(|&(j, _)| j < end) {
                    chars.next();
                }
            }
            'C' | 'B' => {
                let pair = if c == 'C' { 'l' } else { 'r' };
                if chars.peek().is_some_and(|&(_, n)| n == pair) {
                    chars.next();
                    out.push(format!("{c}{pair}"));
                } else {
                    out.push(c.to_string());
                }
            }
            _ => out.push(c.to_string()),
        }
    }
    out
}

pub fn sentinel(i: usize) -> String {
    format!("<{i}>")
}

/// Replace the given `(start, len)` spans (sorted, non-overlapping) with sentinels.
pub fn corrupt_spans(tokens: &[String], spans: &[(usize, usize)]) -> (Vec<String>, Vec<String>) {
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut pos = 0;
    for (i, &(start, len)) in spans.iter().enumerate() {
        assert!(
            start >= pos && start + len <= tokens.len(),
            "spans sorted and in range"
        );
        input.extend_from_slice(&tokens[pos..start]);
        input.push(sentinel(i));
        target.push(sentinel(i));
        target.extend_from_slice(&tokens[start..start + len]);
        pos = start + len;
    }
    input.extend_from_slice(&tokens[pos..]);
    (input, target)
}

/// T5-style span corruption: about `corrupt_ratio` of the tokens in spans with
/// geometric lengths of mean `mean_span`.
pub fn span_corrupt<R: Rng>(
    tokens: &[String],
    rng: &mut R,
    corrupt_ratio: f64,
    mean_span: f64,
) -> (Vec<String>, Vec<String>) {
    let n = tokens.len();
    let noise = ((n as f64 * corrupt_ratio).round() as usize).min(n.saturating_sub(1));
    if noise == 0 {
        return (tokens.to_vec(), Vec::new());
    }
    let geo = Geometric::new(1.0 / mean_span.max(1.0)).expect("probability in (0, 1]");
    let mut lengths = Vec::new();
    let mut total = 0;
    while total < noise {
        let len = (1 + geo.sample(rng) as usize).min(noise - total);
        lengths.push(len);
        total += len;
    }
    // distribute the clean tokens into the gaps around the spans
    let clean = n - noise;
    let mut cuts: Vec<usize> = (0..lengths.len())
        .map(|_| rng.gen_range(0..=clean))
        .collect();
    cuts.sort_unstable();
    let mut spans = Vec::with_capacity(lengths.len());
    let mut pos = 0;
    let mut prev_cut = 0;
    for (len, cut) in lengths.into_iter().zip(cuts) {
        pos += cut - prev_cut;
        prev_cut = cut;
        spans.push((pos, len));
        pos += len;
    }
    corrupt_spans(tokens, &spans)
}

/// Undo [`span_corrupt`]; `None` when the sentinels do not line up.
pub fn reconstruct(input: &[String], target: &[String]) -> Option<Vec<String>> {
    let mut spans: Vec<Vec<String>> = Vec::new();
    for t in target {
        if *t == sentinel(spans.len()) {
            spans.push(Vec::new());
        } else {
            spans.last_mut()?.push(t.clone());
        }
    }
    let mut out = Vec::new();
    let mut next = 0;
    for t in input {
        if next < spans.len() && *t == sentinel(next) {
            out.extend(spans[next].iter().cloned());
            next += 1;
        } else {
            out.push(t.clone());
        }
    }
    (next == spans.len()).then_some(out)
}

fn mlm_record<R: Rng>(
    task: TaskKind,
    tokens: &[String],
    joiner: &str,
    rng: &mut R,
    cfg: &TaskConfig,
) -> Option<TaskRecord> {
    if tokens.len() < 2 {
        return None;
    }
    let (input, target) = span_corrupt(tokens, rng, cfg.corrupt_ratio, cfg.mean_span);
    Some(record(
        task,
        FILL_PREFIX,
        input.join(joiner),
        target.join(joiner),
    ))
}

pub fn make_mlm_text<R: Rng>(text: &str, rng: &mut R, cfg: &TaskConfig) -> Option<TaskRecord> {
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    mlm_record(TaskKind::MlmText, &tokens, " ", rng, cfg)
}

/// SMILES tokens are joined with single spaces so sentinels stay separable.
pub fn make_mlm_smiles<R: Rng>(smiles: &str, rng: &mut R, cfg: &TaskConfig) -> Option<TaskRecord> {
    mlm_record(TaskKind::MlmSmiles, &smiles_tokens(smiles), " ", rng, cfg)
}

pub fn make_property_records(
    smiles: &str,
    items: &[PropertyItem],
) -> Result<Vec<TaskRecord>, TaskError> {
    parse(smiles).map_err(|source| TaskError::InvalidSmiles {
        smiles: smiles.to_string(),
        source,
    })?;
    Ok(items
        .iter()
        .map(|it| {
            record(
                TaskKind::Property,
                &property_prefix(it.property_name),
                smiles.to_string(),
                it.value_text.clone(),
            )
        })
        .collect())
}

pub fn spatial_input(smiles: &str, atom: usize) -> String {
    format!("{smiles}; atom {atom}")
}

/// "neighbors: C(single), O(double); aromatic: no; ring: yes(6)".
pub fn spatial_target(g: &MolecularGraph, atom: usize) -> String {
    let mut nbrs: Vec<String> = g
        .adjacency(atom)
        .iter()
        .map(|&(n, b)| {
            format!(
                "{}({})",
                g.atoms()[n].element.symbol(),
                g.bonds()[b].order.name()
            )
        })
        .collect();
    nbrs.sort();
    let neighbors = if nbrs.is_empty() {
        "none".to_string()
    } else {
        nbrs.join(", ")
    };
    let aromatic = if g.atoms()[atom].aromatic {
        "yes"
    } else {
        "no"
    };
    let mut sizes = g.ring_sizes_of(atom);
    sizes.sort_unstable();
    let ring = if sizes.is_empty() {
        "no".to_string()
    } else {
        let s: Vec<String> = sizes.iter().map(usize::to_string).collect();
        format!("yes({})", s.join(","))
    };
    format!("neighbors: {neighbors}; aromatic: {aromatic}; ring: {ring}")
}

/// Number of atoms marked: `ceil(mark_ratio * n)`, at least one.
pub fn mark_count(n: usize, mark_ratio: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = (mark_ratio * n as f64 - 1e-9).ceil().max(1.0) as usize;
    raw.min(n)
}

/// One record per randomly marked atom; atom indices follow the input SMILES.
pub fn make_spatial_records<R: Rng>(
    g: &MolecularGraph,
    rng: &mut R,
    mark_ratio: f64,
) -> Vec<TaskRecord> {
    let n = g.atom_count();
    let mut marked = index::sample(rng, n, mark_count(n, mark_ratio)).into_vec();
    marked.sort_unstable();
    marked
        .into_iter()
        .map(|a| {
            record(
                TaskKind::Spatial,
                SPATIAL_PREFIX,
                spatial_input(g.source(), a),
                spatial_target(g, a),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRef {
    pub mention: String,
    pub smiles: String,
    pub name: String,
}

/// A text-to-SMILES record listing every mention's SMILES in order, plus one
/// SMILES-to-name record per distinct entity.
pub fn make_mapping_records(text: &str, entities: &[EntityRef]) -> Vec<TaskRecord> {
    if entities.is_empty() {
        return Vec::new();
    }
    let target: Vec<&str> = entities.iter().map(|e| e.smiles.as_str()).collect();
    let mut out = vec![record(
        TaskKind::MapText2Smiles,
        TEXT2SMILES_PREFIX,
        text.to_string(),
        target.join(" "),
    )];
    let mut seen = BTreeSet::new();
    for e in entities {
        if seen.insert((&e.smiles, &e.name)) {
            out.push(record(
                TaskKind::MapSmiles2Name,
                SMILES2NAME_PREFIX,
                e.smiles.clone(),
                e.name.clone(),
            ));
        }
    }
    out
}

pub fn make_name_record(name: &str, smiles: &str) -> TaskRecord {
    record(
        TaskKind::MapName2Smiles,
        NAME2SMILES_PREFIX,
        name.to_string(),
        smiles.to_string(),
    )
}

pub const ENTITY_SEPARATOR: &str = "\nEntities: ";

fn canonical_of(smiles: &str) -> Option<String> {
    parse(smiles).ok().map(|g| canonical(&g))
}

/// Append the entity SMILES to the text, dropping any entity whose canonical
/// form equals a canonical answer.
pub fn make_prompt(text: &str, entities: &[EntityRef], answer_smiles: &[String]) -> String {
    let answers: BTreeSet<String> = answer_smiles
        .iter()
        .filter_map(|s| canonical_of(s))
        .collect();
    let mut seen = BTreeSet::new();
    let kept: Vec<String> = entities
        .iter()
        .filter(|e| canonical_of(&e.smiles).is_none_or(|c| !answers.contains(&c)))
        .filter(|e| seen.insert(e.mention.to_lowercase()))
        .map(|e| format!("{}={}", e.mention, e.smiles))
        .collect();
    if kept.is_empty() {
        text.to_string()
    } else {
        format!("{text}{ENTITY_SEPARATOR}{}", kept.join("; "))
    }
}

/// Entities found in `text`, in mention order.
pub fn entities_in(text: &str, lexicon: &Lexicon) -> Vec<EntityRef> {
    recognize(text, lexicon)
        .into_iter()
        .map(|m| EntityRef {
            mention: m.surface,
            smiles: m.smiles,
            name: m.preferred_name,
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub requested: usize,
    pub produced: usize,
    pub skipped: usize,
}

/// Describe each pool molecule with a backend to synthesize extra pairs.
/// Fails before any backend call when a pool molecule is canonically equal
/// to an evaluation reference; the error lists those reference ids.
pub fn dual_augment(
    pool: &[String],
    backend: &dyn Backend,
    references: &[(String, String)],
) -> Result<(Vec<MoleculeDescriptionPair>, AugmentStats), TaskError> {
    let pool_canon: BTreeSet<String> = pool.iter().filter_map(|s| canonical_of(s)).collect();
    let overlap: Vec<String> = references
        .iter()
        .filter(|(_, s)| canonical_of(s).is_some_and(|c| pool_canon.contains(&c)))
        .map(|(id, _)| id.clone())
        .collect();
    if !overlap.is_empty() {
        return Err(TaskError::Overlap { ids: overlap });
    }
    let mut stats = AugmentStats {
        requested: pool.len(),
        ..AugmentStats::default()
    };
    let mut out = Vec::new();
    for (i, smiles) in pool.iter().enumerate() {
        if parse(smiles).is_err() {
            stats.skipped += 1;
            continue;
        }
        match backend.understand(smiles) {
            Ok(description) if !description.trim().is_empty() => {
                let meta = BTreeMap::from([
                    ("augmented".to_string(), "true".to_string()),
                    ("backend".to_string(), backend.id().to_string()),
                ]);
                out.push(MoleculeDescriptionPair {
                    id: format!("aug_{i:05}"),
                    smiles: smiles.clone(),
                    description,
                    names: Vec::new(),
                    meta,
                });
                stats.produced += 1;
            }
            _ => stats.skipped += 1,
        }
    }
    Ok((out, stats))
}

/// Molecule with measured properties, one per line of a properties file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySource {
    pub name: String,
    pub smiles: String,
    pub properties: Vec<PropertyItem>,
}

/// Input files for a pre-training build. Any subset may be given.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainSources {
    /// One paragraph per line.
    pub text: Option<PathBuf>,
    /// "SMILES<TAB>id" per line.
    pub smiles: Option<PathBuf>,
    pub properties: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Molecule-description pairs for entity-prompted text-to-SMILES records.
    pub pairs: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, TaskError> {
    fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, TaskError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TaskError::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn item_rng(seed: u64, source: &str, key: &str) -> ChaCha8Rng {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(source.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(key.as_bytes());
    ChaCha8Rng::seed_from_u64(fnv1a64(&bytes))
}

fn tag(mut r: TaskRecord, source: &str, key: &str) -> TaskRecord {
    r.meta.insert("source".into(), source.into());
    r.meta.insert("item".into(), key.into());
    r
}

/// Generate records from every given source and shuffle them by `seed`.
pub fn generate_pretrain(
    sources: &PretrainSources,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<Vec<TaskRecord>, TaskError> {
    let mut out = Vec::new();
    let lexicon = match &sources.lexicon {
        Some(p) => {
            let (lex, _) = crate::lexicon::load_kb(p).map_err(|e| TaskError::Schema {
                path: p.clone(),
                line: 0,
                message: e.to_string(),
            })?;
            for (name, entry) in lex.entries() {
                out.push(tag(
                    make_name_record(name, &entry.canonical_smiles),
                    "lexicon",
                    name,
                ));
            }
            Some(lex)
        }
        None => None,
    };
    if let Some(p) = &sources.text {
        for (i, line) in read(p)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let key = format!("line{}", i + 1);
            let mut rng = item_rng(seed, "text", &key);
            out.extend(make_mlm_text(line, &mut rng, cfg).map(|r| tag(r, "text", &key)));
            if let Some(lex) = &lexicon {
                for r in make_mapping_records(line, &entities_in(line, lex)) {
                    out.push(tag(r, "text", &key));
                }
            }
        }
    }
    if let Some(p) = &sources.smiles {
        for (i, line) in read(p)?.lines().enumerate() {
            let Some(smiles) = line.split_whitespace().next() else {
                continue;
            };
            let g = parse(smiles).map_err(|e| TaskError::Schema {
                path: p.clone(),
                line: i + 1,
                message: format!("invalid SMILES {smiles:?}: {e}"),
            })?;
            let key = line
                .split_whitespace()
                .nth(1)
                .map_or_else(|| format!("line{}", i + 1), str::to_string);
            let mut rng = item_rng(seed, "smiles", &key);
            out.extend(make_mlm_smiles(smiles, &mut rng, cfg).map(|r| tag(r, "smiles", &key)));
            for r in make_spatial_records(&g, &mut rng, cfg.mark_ratio) {
                out.push(tag(r, "smiles", &key));
            }
        }
    }
    if let Some(p) = &sources.properties {
        for (i, src) in jsonl::<PropertySource>(p)?.into_iter().enumerate() {
            let records = make_property_records(&src.smiles, &src.properties).map_err(|e| {
                TaskError::Schema {
                    path: p.clone(),
                    line: i + 1,
                    message: e.to_string(),
                }
            })?;
            out.extend(records.into_iter().map(|r| tag(r, "properties", &src.name)));
        }
    }
    if let Some(p) = &sources.pairs {
        for pair in jsonl::<MoleculeDescriptionPair>(p)? {
            let entities = lexicon
                .as_ref()
                .map(|lex| entities_in(&pair.description, lex))
                .unwrap_or_default();
            let prompt = make_prompt(
                &pair.description,
                &entities,
                std::slice::from_ref(&pair.smiles),
            );
            let r = record(
                TaskKind::MapText2Smiles,
                TEXT2SMILES_PREFIX,
                prompt,
                pair.smiles.clone(),
            );
            out.push(tag(r, "pairs", &pair.id));
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}
