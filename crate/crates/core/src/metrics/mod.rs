//! Evaluation harness for generation (text to molecule) and understanding
//! (molecule to text) predictions.

mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::FingerprintConfig;
use crate::smiles::{self, MolecularGraph};

pub use text::{
    bleu, char_tokens, lcs_len, levenshtein, rouge, word_tokens, BleuStats, Rouge, BLEU_EPSILON,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate id {0:?} in {1}")]
    DuplicateId(String, &'static str),
    #[error("ids differ between predictions and references: {0}")]
    IdMismatch(String),
    #[error("record {0:?} lacks {1}")]
    MissingField(String, &'static str),
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a prediction or reference file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Record {
    /// SMILES a generation reference points at: `text`, else the first candidate.
    fn reference_smiles(&self) -> Option<&str> {
        self.text
            .as_deref()
            .or_else(|| self.candidates.as_ref()?.first().map(String::as_str))
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| EvalError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Understanding,
    Generation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    /// Always null; METEOR needs external synonym resources.
    pub meteor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenMetrics {
    pub em: f64,
    pub hit3: f64,
    pub bleu_char: f64,
    pub levenshtein_mean: f64,
    pub fts_rdk: f64,
    pub fts_maccs: f64,
    pub fts_morgan: f64,
    pub validity: f64,
    pub valid_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub n: usize,
    pub reference_invalid: usize,
    pub text_metrics: Option<TextMetrics>,
    pub gen_metrics: Option<GenMetrics>,
    pub per_turn: Option<BTreeMap<u32, GenMetrics>>,
}

/// True iff both strings parse and their canonical forms are equal.
pub fn exact_match(prediction: &str, reference: &str) -> bool {
    match (smiles::parse(prediction), smiles::parse(reference)) {
        (Ok(p), Ok(r)) => smiles::canonical(&p) == smiles::canonical(&r),
        _ => false,
    }
}

/// True iff one of the first `k` candidates exact-matches `reference`.
pub fn hit_at_k(candidates: &[String], reference: &str, k: usize) -> bool {
    let Ok(r) = smiles::parse(reference) else {
        return false;
    };
    let target = smiles::canonical(&r);
    candidates.iter().take(k).any(|c| {
        smiles::parse(c)
            .map(|g| smiles::canonical(&g) == target)
            .unwrap_or(false)
    })
}

/// Pair predictions with references by id; both sides sorted by id.
fn align<'a>(
    predictions: &'a [Record],
    references: &'a [Record],
) -> Result<Vec<(&'a Record, &'a Record)>, EvalError> {
    fn index<'r>(
        records: &'r [Record],
        side: &'static str,
    ) -> Result<BTreeMap<&'r str, &'r Record>, EvalError> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.insert(r.id.as_str(), r).is_some() {
                return Err(EvalError::DuplicateId(r.id.clone(), side));
            }
        }
        Ok(map)
    }
    let preds = index(predictions, "predictions")?;
    let refs = index(references, "references")?;
    let p_ids: BTreeSet<&str> = preds.keys().copied().collect();
    let r_ids: BTreeSet<&str> = refs.keys().copied().collect();
    if p_ids != r_ids {
        let only_p: Vec<&str> = p_ids.difference(&r_ids).copied().take(5).collect();
        let only_r: Vec<&str> = r_ids.difference(&p_ids).copied().take(5).collect();
        return Err(EvalError::IdMismatch(format!(
            "only in predictions {only_p:?}, only in references {only_r:?}"
        )));
    }
    Ok(refs.iter().map(|(id, r)| (preds[id], *r)).collect())
}

struct GenRow {
    turn: Option<u32>,
    em: bool,
    hit3: bool,
    valid: bool,
    reference: String,
    prediction: String,
    levenshtein: usize,
    fts: [f64; 3],
}

fn gen_row(
    pred: &Record,
    reference: &Record,
    ref_graph: &MolecularGraph,
    fp: &FingerprintConfig,
) -> Result<GenRow, EvalError> {
    let candidates = pred
        .candidates
        .as_ref()
        .filter(|c| !c.is_empty())
        .ok_or_else(|| EvalError::MissingField(pred.id.clone(), "candidates"))?;
    let ref_smiles = reference.reference_smiles().unwrap_or_default();
    let target = smiles::canonical(ref_graph);
    let first = &candidates[0];
    let parsed = smiles::parse(first);
    let em = parsed
        .as_ref()
        .map(|g| smiles::canonical(g) == target)
        .unwrap_or(false);
    let hit3 = candidates.iter().take(3).any(|c| {
        smiles::parse(c)
            .map(|g| smiles::canonical(&g) == target)
            .unwrap_or(false)
    });
    let fts = match &parsed {
        Ok(g) => {
            let s = fp.similarity(g, ref_graph);
            [s.rdk, s.maccs, s.morgan]
        }
        Err(_) => [0.0; 3],
    };
    Ok(GenRow {
        turn: pred.turn.or(reference.turn),
        em,
        hit3,
        valid: parsed.is_ok(),
        reference: ref_smiles.to_string(),
        prediction: first.clone(),
        levenshtein: levenshtein(first, ref_smiles),
        fts,
    })
}

fn summarize(rows: &[&GenRow]) -> GenMetrics {
    let n = rows.len();
    if n == 0 {
        return GenMetrics {
            em: 0.0,
            hit3: 0.0,
            bleu_char: 0.0,
            levenshtein_mean: 0.0,
            fts_rdk: 0.0,
            fts_maccs: 0.0,
            fts_morgan: 0.0,
            validity: 0.0,
            valid_count: 0,
        };
    }
    let nf = n as f64;
    let mean = |f: &dyn Fn(&GenRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / nf;
    let mut stats = BleuStats::new(4);
    for r in rows {
        stats.add(&char_tokens(&r.reference), &char_tokens(&r.prediction));
    }
    GenMetrics {
        em: mean(&|r| f64::from(u8::from(r.em))),
        hit3: mean(&|r| f64::from(u8::from(r.hit3))),
        bleu_char: stats.score(),
        levenshtein_mean: mean(&|r| r.levenshtein as f64),
        fts_rdk: mean(&|r| r.fts[0]),
        fts_maccs: mean(&|r| r.fts[1]),
        fts_morgan: mean(&|r| r.fts[2]),
        validity: mean(&|r| f64::from(u8::from(r.valid))),
        valid_count: rows.iter().filter(|r| r.valid).count(),
    }
}

/// Generation metrics over id-aligned records. Records whose reference does
/// not parse are excluded and counted in `reference_invalid`.
pub fn evaluate_generation(
    predictions: &[Record],
    references: &[Record],
    fp: &FingerprintConfig,
) -> Result<EvalReport, EvalError> {
    let pairs = align(predictions, references)?;
    let mut rows = Vec::with_capacity(pairs.len());
    let mut reference_invalid = 0;
    for (pred, reference) in pairs {
        let smiles_text = reference
            .reference_smiles()
            .ok_or_else(|| EvalError::MissingField(reference.id.clone(), "text"))?;
        match smiles::parse(smiles_text) {
            Ok(g) => rows.push(gen_row(pred, reference, &g, fp)?),
            Err(_) => reference_invalid += 1,
        }
    }
    let all: Vec<&GenRow> = rows.iter().collect();
    let per_turn = if rows.iter().any(|r| r.turn.is_some()) {
        let mut groups: BTreeMap<u32, Vec<&GenRow>> = BTreeMap::new();
        for r in &rows {
            if let Some(t) = r.turn {
                groups.entry(t).or_default().push(r);
            }
        }
        Some(
            groups
                .into_iter()
                .map(|(t, g)| (t, summarize(&g)))
                .collect(),
        )
    } else {
        None
    };
    Ok(EvalReport {
        task: Task::Generation,
        n: rows.len(),
        reference_invalid,
        text_metrics: None,
        gen_metrics: Some(summarize(&all)),
        per_turn,
    })
}

/// Corpus BLEU-2/4 and mean ROUGE over word tokens of the `text` fields.
pub fn evaluate_understanding(
    predictions: &[Record],
    references: &[Record],
) -> Result<EvalReport, EvalError> {
    let pairs = align(predictions, references)?;
    let mut b2 = BleuStats::new(2);
    let mut b4 = BleuStats::new(4);
    let mut sums = [0.0f64; 3];
    for (pred, reference) in &pairs {
        let hyp = word_tokens(
            pred.text
                .as_deref()
                .ok_or_else(|| EvalError::MissingField(pred.id.clone(), "text"))?,
        );
        let refr = word_tokens(
            reference
                .text
                .as_deref()
                .ok_or_else(|| EvalError::MissingField(reference.id.clone(), "text"))?,
        );
        b2.add(&refr, &hyp);
        b4.add(&refr, &hyp);
        let r = rouge(&refr, &hyp);
        sums[0] += r.rouge1_f;
        sums[1] += r.rouge2_f;
        sums[2] += r.rouge_l_f;
    }
    let n = pairs.len();
    let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    Ok(EvalReport {
        task: Task::Understanding,
        n,
        reference_invalid: 0,
        text_metrics: Some(TextMetrics {
            bleu2: b2.score(),
            bleu4: b4.score(),
            rouge1: mean(sums[0]),
            rouge2: mean(sums[1]),
            rouge_l: mean(sums[2]),
            meteor: None,
        }),
        gen_metrics: None,
        per_turn: None,
    })
}
