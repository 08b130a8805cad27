//! SMILES parsing, validation, ring perception, aromaticity and canonical output.
//!
//! Parsing runs the whole pipeline: the string is read into atoms and bonds,
//! lowercase (aromatic) input is kekulized by maximum matching, valences are
//! checked against the permitted table, rings are perceived and aromaticity
//! is re-derived from the Kekulé structure. Stereo markers are read and dropped.

mod aromaticity;
mod canon;
mod element;
mod kekule;
mod parser;
mod rings;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical, canonical_ranks, write_with_priority};
pub use element::Element;
pub use parser::parse;

/// Bond multiplicity. `Aromatic` only appears between two aromatic atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable small integer used in hashing and ranking.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BondOrder::Single => "single",
            BondOrder::Double => "double",
            BondOrder::Triple => "triple",
            BondOrder::Aromatic => "aromatic",
        }
    }

    /// Valence used when a bond is read as written; aromatic counts as one.
    pub(crate) fn written_valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside brackets; `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
    pub index: usize,
}

impl Atom {
    pub fn total_h(&self) -> u8 {
        self.implicit_h + self.explicit_h.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub in_ring: bool,
    /// Kekulé order; equals `order` for non-aromatic bonds.
    pub kekule: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    UnbalancedParen,
    UnclosedRingBond,
    UnknownSymbol,
    ValenceViolation,
    KekulizationFailure,
    EmptyInput,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::UnbalancedParen => "unbalanced parenthesis",
            ParseErrorKind::UnclosedRingBond => "unclosed ring bond",
            ParseErrorKind::UnknownSymbol => "unknown symbol",
            ParseErrorKind::ValenceViolation => "valence violation",
            ParseErrorKind::KekulizationFailure => "kekulization failure",
            ParseErrorKind::EmptyInput => "empty input",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} at byte {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, position: usize) -> Self {
        ParseError { kind, position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("atom index {index} out of range for a graph with {len} atoms")]
pub struct AtomIndexError {
    pub index: usize,
    pub len: usize,
}

/// A parsed molecule. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    rings: Vec<Vec<usize>>,
    source: String,
    adjacency: Vec<Vec<(usize, usize)>>,
    component: Vec<usize>,
    n_components: usize,
    smallest_ring: Vec<Option<usize>>,
}

impl MolecularGraph {
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>, source: String) -> Self {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let (component, n_components) = components(&adjacency);
        let edges: Vec<(usize, usize)> = bonds.iter().map(|b| (b.a, b.b)).collect();
        let rings = rings::sssr(n, &edges, &adjacency, n_components);
        let mut smallest_ring = vec![None; n];
        for ring in &rings {
            for &a in ring {
                let cur: &mut Option<usize> = &mut smallest_ring[a];
                *cur = Some(cur.map_or(ring.len(), |s| s.min(ring.len())));
            }
        }
        let mut graph = MolecularGraph {
            atoms,
            bonds,
            rings,
            source,
            adjacency,
            component,
            n_components,
            smallest_ring,
        };
        let cyclic = rings::cyclic_edges(n, &graph.adjacency, graph.bonds.len());
        for (bond, in_ring) in graph.bonds.iter_mut().zip(cyclic) {
            bond.in_ring = in_ring;
        }
        graph
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Smallest set of smallest rings, each as an ordered atom cycle.
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn component_count(&self) -> usize {
        self.n_components
    }

    pub fn component_of(&self, atom: usize) -> usize {
        self.component[atom]
    }

    /// `(neighbor, bond index)` pairs sorted by neighbor index.
    pub fn adjacency(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, i)| &self.bonds[i])
    }

    pub fn in_ring(&self, atom: usize) -> bool {
        self.smallest_ring[atom].is_some()
    }

    pub fn smallest_ring_size(&self, atom: usize) -> Option<usize> {
        self.smallest_ring[atom]
    }

    /// Sizes of all SSSR rings containing `atom`, ascending.
    pub fn ring_sizes_of(&self, atom: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .rings
            .iter()
            .filter(|r| r.contains(&atom))
            .map(Vec::len)
            .collect();
        sizes.sort_unstable();
        sizes
    }

    /// Heavy-atom count (atoms other than hydrogen).
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| a.element != Element::H)
            .count()
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut [Atom] {
        &mut self.atoms
    }

    pub(crate) fn bonds_mut(&mut self) -> &mut [Bond] {
        &mut self.bonds
    }
}

fn components(adjacency: &[Vec<(usize, usize)>]) -> (Vec<usize>, usize) {
    let n = adjacency.len();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = count;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adjacency[v] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// True iff `smiles` parses.
pub fn is_valid(smiles: &str) -> bool {
    parse(smiles).is_ok()
}

/// Bonded partners of `atom`, sorted by atom index.
pub fn neighbors(
    g: &MolecularGraph,
    atom: usize,
) -> Result<Vec<(usize, BondOrder)>, AtomIndexError> {
    if atom >= g.atom_count() {
        return Err(AtomIndexError {
            index: atom,
            len: g.atom_count(),
        });
    }
    Ok(g.adjacency(atom)
        .iter()
        .map(|&(n, b)| (n, g.bonds()[b].order))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AtomRingInfo {
    pub in_ring: bool,
    pub smallest_ring: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RingInfo {
    pub atoms: Vec<AtomRingInfo>,
    pub rings: Vec<Vec<usize>>,
}

pub fn ring_info(g: &MolecularGraph) -> RingInfo {
    RingInfo {
        atoms: (0..g.atom_count())
            .map(|i| AtomRingInfo {
                in_ring: g.in_ring(i),
                smallest_ring: g.smallest_ring_size(i),
            })
            .collect(),
        rings: g.rings().to_vec(),
    }
}

/// Re-derive aromatic flags from the graph's Kekulé bond orders.
pub fn perceive_aromaticity(g: &MolecularGraph) -> MolecularGraph {
    let mut out = g.clone();
    aromaticity::apply(&mut out);
    out
}
