//! Hückel aromaticity over relevant rings of size 5 to 7 and over the
//! envelopes of two fused rings, evaluated on the Kekulé structure so
//! kekulized and aromatic spellings agree.

use super::{rings, BondOrder, Element, MolecularGraph};

/// π electrons an atom donates to a ring, or `None` when it cannot take part.
fn pi_electrons(g: &MolecularGraph, a: usize) -> Option<u32> {
    let atom = &g.atoms()[a];
    let mut ring_double = false;
    let mut exo_double = None;
    for &(nbr, bi) in g.adjacency(a) {
        let bond = &g.bonds()[bi];
        match bond.kekule {
            BondOrder::Double if bond.in_ring => ring_double = true,
            BondOrder::Double => exo_double = Some(nbr),
            BondOrder::Triple => return None,
            _ => {}
        }
    }
    if ring_double {
        let connections = g.degree(a) + atom.total_h() as usize;
        return (exo_double.is_none() && connections <= 3).then_some(1);
    }
    if let Some(partner) = exo_double {
        let p = g.atoms()[partner].element;
        let polar = p == Element::O || p == Element::N || p == Element::S;
        return (atom.element == Element::C && polar).then_some(0);
    }
    let connections = g.degree(a) + atom.total_h() as usize;
    if connections > 3 {
        return None;
    }
    let charge = atom.formal_charge;
    match atom.element {
        Element::C => match (charge, connections) {
            (-1, 3) => Some(2),
            (1, 3) => Some(0),
            _ => None,
        },
        Element::N | Element::P => match (charge, connections) {
            (0, 3) | (-1, 2) => Some(2),
            _ => None,
        },
        Element::O | Element::S | Element::SE | Element::TE => {
            (charge == 0 && connections == 2).then_some(2)
        }
        _ => None,
    }
}

fn ring_bonds(g: &MolecularGraph, cycle: &[usize]) -> Vec<usize> {
    (0..cycle.len())
        .map(|i| {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            g.adjacency(a)
                .iter()
                .find(|(w, _)| *w == b)
                .map(|&(_, bi)| bi)
                .expect("ring bond")
        })
        .collect()
}

fn huckel(total: Option<u32>) -> bool {
    matches!(total, Some(t) if t % 4 == 2)
}

/// Atoms and bonds lying in aromatic rings.
pub(crate) fn perceive(g: &MolecularGraph) -> (Vec<bool>, Vec<bool>) {
    let n = g.atom_count();
    let edges: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.a, b.b)).collect();
    let adjacency: Vec<Vec<(usize, usize)>> = (0..n).map(|i| g.adjacency(i).to_vec()).collect();
    let mut atom_flags = vec![false; n];
    let mut bond_flags = vec![false; edges.len()];
    let contributions: Vec<Option<u32>> = (0..n).map(|a| pi_electrons(g, a)).collect();
    let rings: Vec<(Vec<usize>, Vec<usize>)> = rings::relevant_cycles(n, &edges, &adjacency, 7)
        .into_iter()
        .filter(|c| c.len() >= 5)
        .map(|c| {
            let bonds = ring_bonds(g, &c);
            (c, bonds)
        })
        .collect();
    let mut aromatic_ring = vec![false; rings.len()];
    for (k, (cycle, _)) in rings.iter().enumerate() {
        aromatic_ring[k] = huckel(cycle.iter().map(|&a| contributions[a]).sum());
    }
    // envelopes of two fused rings: symmetric difference of the bond sets is one cycle
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            if aromatic_ring[i] && aromatic_ring[j] {
                continue;
            }
            let (ci, bi) = &rings[i];
            let (cj, bj) = &rings[j];
            let shared_bonds = bi.iter().filter(|b| bj.contains(b)).count();
            let shared_atoms = ci.iter().filter(|a| cj.contains(a)).count();
            if shared_bonds == 0 || shared_atoms != shared_bonds + 1 {
                continue;
            }
            if ci.iter().chain(cj).any(|&a| contributions[a].is_none()) {
                continue;
            }
            let outer: Vec<usize> = bi
                .iter()
                .chain(bj)
                .copied()
                .filter(|b| !(bi.contains(b) && bj.contains(b)))
                .collect();
            let mut degree = vec![0usize; n];
            for &b in &outer {
                degree[edges[b].0] += 1;
                degree[edges[b].1] += 1;
            }
            if degree.iter().any(|&d| d != 0 && d != 2) {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&a| degree[a] == 2).collect();
            if members.len() != outer.len() {
                continue;
            }
            if huckel(members.iter().map(|&a| contributions[a]).sum()) {
                aromatic_ring[i] = true;
                aromatic_ring[j] = true;
            }
        }
    }
    for (k, (cycle, bonds)) in rings.iter().enumerate() {
        if !aromatic_ring[k] {
            continue;
        }
        for &a in cycle {
            atom_flags[a] = true;
        }
        for &b in bonds {
            bond_flags[b] = true;
        }
    }
    (atom_flags, bond_flags)
}

pub(crate) fn apply(g: &mut MolecularGraph) {
    let (atom_flags, bond_flags) = perceive(g);
    for (atom, flag) in g.atoms_mut().iter_mut().zip(atom_flags) {
        atom.aromatic = flag;
    }
    for (bond, flag) in g.bonds_mut().iter_mut().zip(bond_flags) {
        bond.order = if flag {
            BondOrder::Aromatic
        } else {
            bond.kekule
        };
    }
}
