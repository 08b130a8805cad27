//! Canonical atom ranking (iterative invariant refinement with tie breaking)
//! and depth-first SMILES output.

use std::collections::HashMap;

use super::parser::{bracket_needs_double, organic_hydrogens};
use super::{BondOrder, MolecularGraph};

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn initial_ranks(g: &MolecularGraph) -> Vec<usize> {
    let keys: Vec<_> = g
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.element.atomic_number(),
                g.degree(i),
                a.formal_charge,
                a.total_h(),
                g.smallest_ring_size(i).unwrap_or(0),
                a.aromatic,
                a.isotope.unwrap_or(0),
            )
        })
        .collect();
    dense_rank(&keys)
}

fn refine(g: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.atom_count())
            .map(|i| {
                let mut env: Vec<(usize, u8)> = g
                    .adjacency(i)
                    .iter()
                    .map(|&(n, b)| (ranks[n], g.bonds()[b].order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = dense_rank(&keys);
        let next_classes = class_count(&next);
        if next_classes == classes {
            return next;
        }
        classes = next_classes;
        ranks = next;
    }
}

/// Canonical atom ranks: a permutation of `0..n` that depends only on the
/// graph up to isomorphism (for ties among symmetry-equivalent atoms).
pub fn canonical_ranks(g: &MolecularGraph) -> Vec<usize> {
    let n = g.atom_count();
    let mut ranks = refine(g, initial_ranks(g));
    while class_count(&ranks) < n {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &r in &ranks {
            *counts.entry(r).or_default() += 1;
        }
        let tied = (0..n)
            .map(|i| ranks[i])
            .filter(|r| counts[r] > 1)
            .min()
            .expect("a tied class exists");
        let chosen = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let split: Vec<usize> = (0..n)
            .map(|i| 2 * ranks[i] + usize::from(ranks[i] == tied && i != chosen))
            .collect();
        ranks = refine(g, dense_rank(&split));
    }
    ranks
}

struct Writer<'a> {
    g: &'a MolecularGraph,
    priority: &'a [u64],
    kekule: bool,
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    opens: Vec<Vec<usize>>,
    closes: Vec<Vec<usize>>,
    closure_seen: Vec<bool>,
    digits: HashMap<usize, u32>,
    free_digits: Vec<bool>,
}

impl<'a> Writer<'a> {
    fn sorted_neighbors(&self, a: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.g.adjacency(a).to_vec();
        nbrs.sort_by_key(|&(n, _)| (self.priority[n], n));
        nbrs
    }

    fn build_tree(&mut self, a: usize, parent_bond: usize) {
        self.visited[a] = true;
        for (nbr, bi) in self.sorted_neighbors(a) {
            if bi == parent_bond {
                continue;
            }
            if self.visited[nbr] {
                if !self.closure_seen[bi] {
                    self.closure_seen[bi] = true;
                    self.opens[nbr].push(bi);
                    self.closes[a].push(bi);
                }
            } else {
                self.children[a].push((nbr, bi));
                self.build_tree(nbr, bi);
            }
        }
    }

    fn bond_order(&self, bi: usize) -> BondOrder {
        let b = &self.g.bonds()[bi];
        if self.kekule {
            b.kekule
        } else {
            b.order
        }
    }

    fn bond_symbol(&self, bi: usize) -> &'static str {
        let b = &self.g.bonds()[bi];
        match self.bond_order(bi) {
            BondOrder::Aromatic => "",
            BondOrder::Single => {
                let atoms = self.g.atoms();
                if !self.kekule && atoms[b.a].aromatic && atoms[b.b].aromatic {
                    "-"
                } else {
                    ""
                }
            }
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }

    fn atom_symbol(&self, a: usize) -> String {
        let atom = &self.g.atoms()[a];
        let aromatic = atom.aromatic && !self.kekule;
        let written: u8 = self
            .g
            .adjacency(a)
            .iter()
            .map(|&(_, bi)| self.bond_order(bi).written_valence())
            .sum();
        let hidden_double = aromatic
            && self.g.adjacency(a).iter().any(|&(_, bi)| {
                let b = &self.g.bonds()[bi];
                b.order == BondOrder::Aromatic && b.kekule == BondOrder::Double
            });
        let h = atom.total_h();
        let symbol = if aromatic {
            atom.element.symbol().to_ascii_lowercase()
        } else {
            atom.element.symbol().to_string()
        };
        if atom.element.is_organic_subset()
            && atom.formal_charge == 0
            && atom.isotope.is_none()
            && organic_hydrogens(atom.element, aromatic, written) == (h, hidden_double)
        {
            return symbol;
        }
        debug_assert!(
            !aromatic
                || bracket_needs_double(atom.element, atom.formal_charge, written, h)
                    == hidden_double
        );
        let mut s = String::from("[");
        if let Some(iso) = atom.isotope {
            s.push_str(&iso.to_string());
        }
        s.push_str(&symbol);
        match h {
            0 => {}
            1 => s.push('H'),
            n => {
                s.push('H');
                s.push_str(&n.to_string());
            }
        }
        match atom.formal_charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            c if c > 0 => s.push_str(&format!("+{c}")),
            c => s.push_str(&format!("-{}", -c)),
        }
        s.push(']');
        s
    }

    fn take_digit(&mut self) -> u32 {
        match self.free_digits.iter().position(|f| *f) {
            Some(i) => {
                self.free_digits[i] = false;
                i as u32 + 1
            }
            None => {
                self.free_digits.push(false);
                self.free_digits.len() as u32
            }
        }
    }

    fn digit_text(d: u32) -> String {
        if d < 10 {
            d.to_string()
        } else {
            format!("%{d}")
        }
    }

    fn emit(&mut self, a: usize, out: &mut String) {
        out.push_str(&self.atom_symbol(a));
        for bi in self.closes[a].clone() {
            let d = self.digits.remove(&bi).expect("ring opened");
            out.push_str(&Self::digit_text(d));
            self.free_digits[d as usize - 1] = true;
        }
        for bi in self.opens[a].clone() {
            let d = self.take_digit();
            self.digits.insert(bi, d);
            out.push_str(self.bond_symbol(bi));
            out.push_str(&Self::digit_text(d));
        }
        let children = self.children[a].clone();
        for (k, &(child, bi)) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                out.push('(');
            }
            out.push_str(self.bond_symbol(bi));
            self.emit(child, out);
            if !last {
                out.push(')');
            }
        }
    }
}

fn write_components(g: &MolecularGraph, priority: &[u64], kekule: bool) -> Vec<String> {
    let n = g.atom_count();
    let mut w = Writer {
        g,
        priority,
        kekule,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
        closure_seen: vec![false; g.bonds().len()],
        digits: HashMap::new(),
        free_digits: Vec::new(),
    };
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| (priority[i], i));
    let mut parts = Vec::new();
    for start in starts {
        if w.visited[start] {
            continue;
        }
        w.build_tree(start, usize::MAX);
        let mut s = String::new();
        w.emit(start, &mut s);
        parts.push(s);
    }
    parts
}

/// Write SMILES visiting atoms in ascending `priority` (ties by index); each
/// component starts at its lowest-priority atom. With `kekule` set, aromatic
/// atoms are written uppercase with explicit alternating bonds.
pub fn write_with_priority(g: &MolecularGraph, priority: &[u64], kekule: bool) -> String {
    assert_eq!(priority.len(), g.atom_count(), "one priority per atom");
    write_components(g, priority, kekule).join(".")
}

/// Canonical SMILES: byte-identical for isomorphic graphs. Stereo is not represented.
pub fn canonical(g: &MolecularGraph) -> String {
    let ranks: Vec<u64> = canonical_ranks(g).into_iter().map(|r| r as u64).collect();
    let mut parts = write_components(g, &ranks, false);
    parts.sort();
    parts.join(".")
}
