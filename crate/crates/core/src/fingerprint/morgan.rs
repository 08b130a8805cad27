//! Circular (ECFP-style) fingerprints by iterated neighborhood hashing.

use super::{fnv1a64, Family, Fingerprint};
use crate::smiles::MolecularGraph;

fn atom_invariant(g: &MolecularGraph, i: usize) -> [u8; 7] {
    let a = &g.atoms()[i];
    [
        a.element.atomic_number(),
        g.degree(i) as u8,
        a.total_h(),
        a.formal_charge as u8,
        u8::from(g.in_ring(i)),
        u8::from(a.aromatic),
        (a.isotope.unwrap_or(0) % 256) as u8,
    ]
}

/// Environment identifiers indexed `[r][atom]` for `r` in `0..=radius`.
/// The radius-`r` identifier hashes the atom's previous identifier with the
/// sorted (bond order, neighbor identifier) pairs.
pub fn morgan_identifiers(g: &MolecularGraph, radius: u32) -> Vec<Vec<u64>> {
    let n = g.atom_count();
    let mut levels: Vec<Vec<u64>> = Vec::with_capacity(radius as usize + 1);
    levels.push(
        (0..n)
            .map(|i| {
                let mut bytes = vec![0u8];
                bytes.extend_from_slice(&atom_invariant(g, i));
                fnv1a64(&bytes)
            })
            .collect(),
    );
    for r in 1..=radius {
        let prev = levels.last().expect("level 0 exists");
        let next = (0..n)
            .map(|i| {
                let mut env: Vec<(u8, u64)> = g
                    .adjacency(i)
                    .iter()
                    .map(|&(nbr, b)| (g.bonds()[b].order.code(), prev[nbr]))
                    .collect();
                env.sort_unstable();
                let mut bytes = vec![r as u8];
                bytes.extend_from_slice(&prev[i].to_le_bytes());
                for (code, id) in env {
                    bytes.push(code);
                    bytes.extend_from_slice(&id.to_le_bytes());
                }
                fnv1a64(&bytes)
            })
            .collect();
        levels.push(next);
    }
    levels
}

/// Each (atom, r) environment sets bit `id mod width`.
pub fn morgan(g: &MolecularGraph, radius: u32, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::new(Family::Morgan, radius, width);
    for level in morgan_identifiers(g, radius) {
        for id in level {
            fp.set((id % width as u64) as usize);
        }
    }
    fp
}
