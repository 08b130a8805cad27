//! Linear path fingerprints.

use std::collections::BTreeSet;

use super::{fnv1a64, Family, Fingerprint};
use crate::smiles::{BondOrder, MolecularGraph};

fn atom_token(g: &MolecularGraph, i: usize) -> String {
    let a = &g.atoms()[i];
    if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    }
}

fn bond_token(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Single => "-",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => ":",
    }
}

fn walk(
    g: &MolecularGraph,
    at: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    tokens: &mut Vec<String>,
    out: &mut BTreeSet<String>,
) {
    for &(nbr, b) in g.adjacency(at) {
        if path.contains(&nbr) {
            continue;
        }
        path.push(nbr);
        tokens.push(bond_token(g.bonds()[b].order).to_string());
        tokens.push(atom_token(g, nbr));
        let forward = tokens.concat();
        let backward: String = tokens.iter().rev().map(String::as_str).collect();
        out.insert(forward.min(backward));
        if path.len() <= max_len {
            walk(g, nbr, max_len, path, tokens, out);
        }
        tokens.pop();
        tokens.pop();
        path.pop();
    }
}

/// Distinct direction-normalized labels of all simple paths of
/// `1..=max_len` bonds, e.g. `"C-C-O"`. Aromatic atoms are lowercase and
/// aromatic bonds are `:`.
pub fn path_labels(g: &MolecularGraph, max_len: u32) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if max_len == 0 {
        return out;
    }
    for start in 0..g.atom_count() {
        let mut path = vec![start];
        let mut tokens = vec![atom_token(g, start)];
        walk(g, start, max_len as usize, &mut path, &mut tokens, &mut out);
    }
    out
}

/// Each path label sets bit `fnv1a64(label) mod width`.
pub fn path_fp(g: &MolecularGraph, max_len: u32, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::new(Family::Path, max_len, width);
    for label in path_labels(g, max_len) {
        fp.set((fnv1a64(label.as_bytes()) % width as u64) as usize);
    }
    fp
}
