#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use convmol::dialogue::{BuildStats, BuilderConfig, Dialogue, MoleculeDescriptionPair};
use convmol::fingerprint::{morgan_identifiers, path_fp, tanimoto};
use convmol::smiles::{canonical, neighbors, parse, ring_info, MolecularGraph};
use convmol::tasks::{TaskKind, TaskRecord, ENTITY_SEPARATOR};
use regex::Regex;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// The bundled molecule corpus, SMILES only.
pub fn corpus() -> Vec<String> {
    std::fs::read_to_string(data_dir().join("molecules.smi"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split('\t').next())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub struct OracleRow {
    pub smiles: String,
    pub aromatic_atoms: usize,
    pub sssr_count: usize,
    pub atoms: usize,
    pub variants: Vec<String>,
}

/// Rows written by RDKit: aromatic atom count, SSSR size, atom count and
/// randomized spellings of each corpus molecule.
pub fn rdkit_oracle() -> Vec<OracleRow> {
    std::fs::read_to_string(fixture("rdkit_oracle.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            OracleRow {
                smiles: c[0].to_string(),
                aromatic_atoms: c[1].parse().unwrap(),
                sssr_count: c[2].parse().unwrap(),
                atoms: c[3].parse().unwrap(),
                variants: c[4].split(',').map(str::to_string).collect(),
            }
        })
        .collect()
}

/// Stand-alone TF-IDF cosine: lowercase alphanumeric words minus stop words,
/// unigrams plus bigrams, tf = 1 + ln(count), idf = ln((1 + N) / (1 + df)) + 1.
pub fn tfidf_cosines(docs: &[&str], query: &str, stop: &[&str]) -> Vec<f64> {
    use std::collections::HashMap;
    let terms = |t: &str| -> Vec<String> {
        let words: Vec<String> = t
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty() && !stop.contains(w))
            .map(str::to_string)
            .collect();
        let mut out = words.clone();
        for i in 1..words.len() {
            out.push(format!("{} {}", words[i - 1], words[i]));
        }
        out
    };
    let counts = |t: &str| {
        let mut m: HashMap<String, f64> = HashMap::new();
        for w in terms(t) {
            *m.entry(w).or_default() += 1.0;
        }
        m
    };
    let doc_counts: Vec<_> = docs.iter().map(|d| counts(d)).collect();
    let n = docs.len() as f64;
    let idf = |term: &str| {
        let df = doc_counts.iter().filter(|c| c.contains_key(term)).count() as f64;
        (df > 0.0).then(|| ((1.0 + n) / (1.0 + df)).ln() + 1.0)
    };
    let vector = |c: &HashMap<String, f64>| {
        let v: HashMap<String, f64> = c
            .iter()
            .filter_map(|(t, k)| idf(t).map(|i| (t.clone(), (1.0 + k.ln()) * i)))
            .collect();
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter()
            .map(|(t, x)| (t, if norm > 0.0 { x / norm } else { 0.0 }))
            .collect::<HashMap<_, _>>()
    };
    let q = vector(&counts(query));
    doc_counts
        .iter()
        .map(|c| {
            let d = vector(c);
            q.iter().map(|(t, x)| x * d.get(t).unwrap_or(&0.0)).sum()
        })
        .collect()
}

/// Structural JSON equality with numbers compared to `tol`.
pub fn assert_json_close(got: &serde_json::Value, want: &serde_json::Value, tol: f64) {
    fn walk(got: &serde_json::Value, want: &serde_json::Value, tol: f64, path: &str) {
        use serde_json::Value;
        match (got, want) {
            (Value::Number(a), Value::Number(b)) => {
                let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                assert!((a - b).abs() <= tol, "{path}: {a} vs {b}");
            }
            (Value::Object(a), Value::Object(b)) => {
                let mut ka: Vec<_> = a.keys().collect();
                let mut kb: Vec<_> = b.keys().collect();
                ka.sort();
                kb.sort();
                assert_eq!(ka, kb, "{path}");
                for k in ka {
                    walk(&a[k], &b[k], tol, &format!("{path}.{k}"));
                }
            }
            _ => assert_eq!(got, want, "{path}"),
        }
    }
    walk(got, want, tol, "$");
}

/// Canonical string of the radius-r unfolding tree rooted at `atom`.
pub fn unfolding_label(g: &MolecularGraph, atom: usize, r: u32) -> String {
    let a = &g.atoms()[atom];
    let own = format!(
        "{}/{}/{}/{}/{}/{}/{}",
        a.element.atomic_number(),
        g.degree(atom),
        a.total_h(),
        a.formal_charge,
        g.in_ring(atom),
        a.aromatic,
        a.isotope.unwrap_or(0)
    );
    if r == 0 {
        return own;
    }
    let mut children: Vec<String> = g
        .adjacency(atom)
        .iter()
        .map(|&(n, b)| {
            format!(
                "{}{}",
                g.bonds()[b].order.code(),
                unfolding_label(g, n, r - 1)
            )
        })
        .collect();
    children.sort();
    format!(
        "[{}|{}]",
        unfolding_label(g, atom, r - 1),
        children.join(",")
    )
}

/// Identifiers and oracle labels partition the atoms identically at every radius.
pub fn morgan_matches_oracle(g: &MolecularGraph, radius: u32) -> bool {
    let ids = morgan_identifiers(g, radius);
    (0..=radius).all(|r| {
        let mut forward: BTreeMap<u64, String> = BTreeMap::new();
        let mut backward: BTreeMap<String, u64> = BTreeMap::new();
        (0..g.atom_count()).all(|a| {
            let id = ids[r as usize][a];
            let label = unfolding_label(g, a, r);
            let f = forward.entry(id).or_insert_with(|| label.clone()).clone();
            let b = *backward.entry(label.clone()).or_insert(id);
            f == label && b == id
        })
    })
}

pub fn rdk(a: &str, b: &str) -> f64 {
    let fa = path_fp(&parse(a).unwrap(), 7, 2048);
    let fb = path_fp(&parse(b).unwrap(), 7, 2048);
    tanimoto(&fa, &fb).unwrap()
}

/// Independent check of every dialogue invariant.
pub fn violations(d: &Dialogue, p: &MoleculeDescriptionPair, cfg: &BuilderConfig) -> Vec<String> {
    let mut v = Vec::new();
    if d.turns.len() < 2 {
        v.push("fewer than two turns".into());
    }
    for (i, t) in d.turns.iter().enumerate() {
        if t.k != i + 1 {
            v.push(format!("turn index {}", t.k));
        }
        if t.text.contains('-') {
            v.push(format!("dash in turn {}", t.k));
        }
        for name in &p.names {
            let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(name))).unwrap();
            if re.is_match(&t.text) {
                v.push(format!("turn {} leaks {name}", t.k));
            }
        }
    }
    for w in d.turns.windows(2) {
        let a: Vec<&str> = w[0].text.split(' ').collect();
        let b: Vec<&str> = w[1].text.split(' ').collect();
        if !(a.len() < b.len() && b[..a.len()] == a[..]) {
            v.push(format!(
                "turn {} not a strict prefix of turn {}",
                w[0].k, w[1].k
            ));
        }
    }
    let last = d.turns.last().unwrap();
    if canonical(&parse(&last.expected_molecule).unwrap()) != canonical(&parse(&p.smiles).unwrap())
        || last.sim_to_final != 1.0
    {
        v.push("final turn".into());
    }
    for t in &d.turns[..d.turns.len() - 1] {
        let s = rdk(&t.expected_molecule, &p.smiles);
        if (s - t.sim_to_final).abs() > 1e-12 {
            v.push(format!(
                "turn {} similarity {} recomputed {s}",
                t.k, t.sim_to_final
            ));
        }
        if !t.low_sim_retained && !(cfg.gate_low..cfg.gate_high).contains(&s) {
            v.push(format!("turn {} similarity {s} outside gate", t.k));
        }
        if t.low_sim_retained && s >= cfg.gate_low {
            v.push(format!("turn {} retained with similarity {s}", t.k));
        }
    }
    if d.provenance.candidate_fingerprints.len() != d.turns.len() {
        v.push("provenance fingerprint count".into());
    }
    v
}

pub fn conserved(s: &BuildStats) -> bool {
    s.input_pairs == s.emitted + s.filtered + s.provider_failed
        && s.filtered == s.filtered_single_turn + s.filtered_dash + s.invalid_pairs
        && s.turn_histogram.values().sum::<usize>() == s.emitted
}

pub fn dp_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]));
        }
    }
    d[a.len()][b.len()]
}

/// Rebuild a spatial target from the public graph API.
pub fn oracle_target(smiles: &str, atom: usize) -> String {
    let g = parse(smiles).unwrap();
    let mut labels: Vec<String> = neighbors(&g, atom)
        .unwrap()
        .into_iter()
        .map(|(n, order)| format!("{}({})", g.atoms()[n].element.symbol(), order.name()))
        .collect();
    labels.sort();
    let nb = if labels.is_empty() {
        "none".to_string()
    } else {
        labels.join(", ")
    };
    let info = ring_info(&g);
    let mut sizes: Vec<usize> = info
        .rings
        .iter()
        .filter(|r| r.contains(&atom))
        .map(Vec::len)
        .collect();
    sizes.sort();
    let ring = if sizes.is_empty() {
        "no".to_string()
    } else {
        format!(
            "yes({})",
            sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    };
    let arom = if g.atoms()[atom].aromatic {
        "yes"
    } else {
        "no"
    };
    format!("neighbors: {nb}; aromatic: {arom}; ring: {ring}")
}

pub fn check_spatial(records: &[TaskRecord], atoms: usize) {
    assert_eq!(
        records.len(),
        ((0.15 * atoms as f64) - 1e-9).ceil().max(1.0) as usize
    );
    let mut seen = HashSet::new();
    for r in records {
        assert_eq!(r.task, TaskKind::Spatial);
        assert_eq!(r.prefix, "Spatial:");
        let (smiles, atom) = r.input.rsplit_once("; atom ").unwrap();
        let atom: usize = atom.parse().unwrap();
        assert!(seen.insert(atom));
        assert_eq!(r.target, oracle_target(smiles, atom));
    }
}

/// Canonical forms of the entity SMILES listed in a prompt.
pub fn prompt_entity_canonicals(prompt: &str) -> Vec<String> {
    match prompt.split_once(ENTITY_SEPARATOR) {
        None => Vec::new(),
        Some((_, list)) => list
            .split("; ")
            .map(|kv| kv.split_once('=').unwrap().1)
            .map(|s| canonical(&parse(s).unwrap()))
            .collect(),
    }
}
