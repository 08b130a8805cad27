//! A fixed set of 48 structural keys, each a graph predicate.

use super::{Family, Fingerprint};
use crate::smiles::{BondOrder, Element, MolecularGraph};

/// Key names in bit order.
pub const KEY_NAMES: [&str; 48] = [
    "C present",
    "N present",
    "O present",
    "S present",
    "P present",
    "F present",
    "Cl present",
    "Br present",
    "I present",
    "B present",
    "other element present",
    "3-ring",
    "4-ring",
    "5-ring",
    "6-ring",
    "7-ring",
    "8-ring",
    "any ring",
    "aromatic rings >= 1",
    "aromatic rings >= 2",
    "aromatic rings >= 3",
    "heteroatom in ring",
    "heteroatom in aromatic ring",
    "fused rings",
    "halogens >= 1",
    "halogens >= 2",
    "halogens >= 3",
    "C=O >= 1",
    "C=O >= 2",
    "carboxylic acid",
    "ester",
    "amide",
    "hydroxyl (non-acyl)",
    "primary amine",
    "nitrile",
    "triple bond",
    "non-aromatic C=C",
    "carbon chain >= 2",
    "carbon chain >= 4",
    "carbon chain >= 6",
    "carbon chain >= 8",
    "positive charge",
    "negative charge",
    "multiple components",
    "heavy atoms >= 10",
    "heavy atoms >= 20",
    "S=O",
    "N=O",
];

fn is_hetero(e: Element) -> bool {
    e != Element::C && e != Element::H
}

/// Carbon atoms doubly bonded to oxygen.
fn carbonyl_carbons(g: &MolecularGraph) -> Vec<usize> {
    (0..g.atom_count())
        .filter(|&i| {
            g.atoms()[i].element == Element::C
                && g.adjacency(i).iter().any(|&(n, b)| {
                    g.atoms()[n].element == Element::O && g.bonds()[b].order == BondOrder::Double
                })
        })
        .collect()
}

/// Single-bonded neighbors of `i` with the given element.
fn single_partners(g: &MolecularGraph, i: usize, e: Element) -> Vec<usize> {
    g.adjacency(i)
        .iter()
        .filter(|&&(n, b)| g.atoms()[n].element == e && g.bonds()[b].order == BondOrder::Single)
        .map(|&(n, _)| n)
        .collect()
}

/// Atoms in the longest simple path through acyclic carbon atoms.
fn longest_chain(g: &MolecularGraph) -> usize {
    let n = g.atom_count();
    let chain: Vec<bool> = (0..n)
        .map(|i| g.atoms()[i].element == Element::C && !g.in_ring(i))
        .collect();
    let farthest = |start: usize| -> (usize, usize) {
        let mut dist = vec![usize::MAX; n];
        dist[start] = 1;
        let mut stack = vec![start];
        let mut best = (1, start);
        while let Some(v) = stack.pop() {
            for &(w, _) in g.adjacency(v) {
                if chain[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    if dist[w] > best.0 {
                        best = (dist[w], w);
                    }
                    stack.push(w);
                }
            }
        }
        best
    };
    let mut longest = 0;
    let mut seen = vec![false; n];
    for i in 0..n {
        if !chain[i] || seen[i] {
            continue;
        }
        // the acyclic carbons form a forest, so two sweeps give the diameter
        let (_, far) = farthest(i);
        let (len, _) = farthest(far);
        longest = longest.max(len);
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in g.adjacency(v) {
                if chain[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    longest
}

/// Evaluate all 48 keys; bit i is set iff key i holds.
pub fn structural_keys(g: &MolecularGraph) -> Fingerprint {
    let atoms = g.atoms();
    let has = |e: Element| atoms.iter().any(|a| a.element == e);
    let known = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::P,
        Element::F,
        Element::CL,
        Element::BR,
        Element::I,
        Element::B,
        Element::H,
    ];
    let ring_sizes: Vec<usize> = g.rings().iter().map(Vec::len).collect();
    let aromatic_rings = g
        .rings()
        .iter()
        .filter(|r| r.iter().all(|&a| atoms[a].aromatic))
        .count();
    let fused = g.bonds().iter().any(|b| {
        g.rings()
            .iter()
            .filter(|r| r.contains(&b.a) && r.contains(&b.b))
            .filter(|r| {
                (0..r.len()).any(|k| {
                    let (x, y) = (r[k], r[(k + 1) % r.len()]);
                    (x, y) == (b.a, b.b) || (y, x) == (b.a, b.b)
                })
            })
            .count()
            >= 2
    });
    let halogens = atoms.iter().filter(|a| a.element.is_halogen()).count();
    let carbonyls = carbonyl_carbons(g);
    let acyl_o: Vec<usize> = carbonyls
        .iter()
        .flat_map(|&c| single_partners(g, c, Element::O))
        .collect();
    let carboxyl = acyl_o
        .iter()
        .any(|&o| g.degree(o) == 1 && (atoms[o].total_h() == 1 || atoms[o].formal_charge == -1));
    let ester = carbonyls.iter().any(|&c| {
        single_partners(g, c, Element::O).iter().any(|&o| {
            g.adjacency(o)
                .iter()
                .any(|&(n, _)| n != c && atoms[n].element == Element::C)
        })
    });
    let amide = carbonyls
        .iter()
        .any(|&c| !single_partners(g, c, Element::N).is_empty());
    let hydroxyl = (0..g.atom_count()).any(|o| {
        atoms[o].element == Element::O
            && atoms[o].total_h() == 1
            && g.degree(o) == 1
            && !acyl_o.contains(&o)
            && atoms[g.adjacency(o)[0].0].element == Element::C
    });
    let primary_amine = (0..g.atom_count()).any(|n| {
        atoms[n].element == Element::N
            && !atoms[n].aromatic
            && atoms[n].total_h() == 2
            && g.degree(n) == 1
            && g.bonds()[g.adjacency(n)[0].1].order == BondOrder::Single
    });
    let bond_between = |e1: Element, e2: Element, order: BondOrder| {
        g.bonds().iter().any(|b| {
            let (x, y) = (atoms[b.a].element, atoms[b.b].element);
            b.order == order && ((x, y) == (e1, e2) || (x, y) == (e2, e1))
        })
    };
    let nitrile = bond_between(Element::C, Element::N, BondOrder::Triple);
    let triple = g.bonds().iter().any(|b| b.order == BondOrder::Triple);
    let alkene = g.bonds().iter().any(|b| {
        b.order == BondOrder::Double
            && atoms[b.a].element == Element::C
            && atoms[b.b].element == Element::C
    });
    let chain = longest_chain(g);
    let heavy = g.heavy_atom_count();
    let in_ring_hetero = (0..g.atom_count()).any(|i| g.in_ring(i) && is_hetero(atoms[i].element));
    let aromatic_hetero = atoms.iter().any(|a| a.aromatic && is_hetero(a.element));

    let keys: [bool; 48] = [
        has(Element::C),
        has(Element::N),
        has(Element::O),
        has(Element::S),
        has(Element::P),
        has(Element::F),
        has(Element::CL),
        has(Element::BR),
        has(Element::I),
        has(Element::B),
        atoms.iter().any(|a| !known.contains(&a.element)),
        ring_sizes.contains(&3),
        ring_sizes.contains(&4),
        ring_sizes.contains(&5),
        ring_sizes.contains(&6),
        ring_sizes.contains(&7),
        ring_sizes.contains(&8),
        !ring_sizes.is_empty(),
        aromatic_rings >= 1,
        aromatic_rings >= 2,
        aromatic_rings >= 3,
        in_ring_hetero,
        aromatic_hetero,
        fused,
        halogens >= 1,
        halogens >= 2,
        halogens >= 3,
        !carbonyls.is_empty(),
        carbonyls.len() >= 2,
        carboxyl,
        ester,
        amide,
        hydroxyl,
        primary_amine,
        nitrile,
        triple,
        alkene,
        chain >= 2,
        chain >= 4,
        chain >= 6,
        chain >= 8,
        atoms.iter().any(|a| a.formal_charge > 0),
        atoms.iter().any(|a| a.formal_charge < 0),
        g.component_count() > 1,
        heavy >= 10,
        heavy >= 20,
        bond_between(Element::S, Element::O, BondOrder::Double),
        bond_between(Element::N, Element::O, BondOrder::Double),
    ];
    let mut fp = Fingerprint::new(Family::Keys, 1, keys.len());
    for (i, _) in keys.iter().enumerate().filter(|(_, k)| **k) {
        fp.set(i);
    }
    fp
}
