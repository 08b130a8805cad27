use std::collections::BTreeMap;

use super::kekule::maximum_matching;
use super::ParseErrorKind::*;
use super::{aromaticity, Atom, Bond, BondOrder, Element, MolecularGraph, ParseError};

#[derive(Debug, Clone)]
struct RawAtom {
    element: Element,
    lowercase: bool,
    charge: i8,
    isotope: Option<u16>,
    hcount: Option<u8>,
    pos: usize,
}

#[derive(Debug, Clone)]
struct RawBond {
    a: usize,
    b: usize,
    order: Option<BondOrder>,
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

struct Reader<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<RawBond>,
    open_rings: BTreeMap<u32, OpenRing>,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.input.get(self.pos + off).copied()
    }

    fn err(&self, kind: super::ParseErrorKind) -> ParseError {
        ParseError::new(kind, self.pos)
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: Option<BondOrder>,
        pos: usize,
    ) -> Result<(), ParseError> {
        if a == b
            || self
                .bonds
                .iter()
                .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(ParseError::new(UnknownSymbol, pos));
        }
        self.bonds.push(RawBond { a, b, order });
        Ok(())
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.input[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn organic_atom(&mut self) -> Result<RawAtom, ParseError> {
        let pos = self.pos;
        let c = self.peek().ok_or_else(|| self.err(UnknownSymbol))?;
        let (symbol, lowercase, len) = match c {
            b'C' if self.peek_at(1) == Some(b'l') => ("Cl", false, 2),
            b'B' if self.peek_at(1) == Some(b'r') => ("Br", false, 2),
            b'B' => ("B", false, 1),
            b'C' => ("C", false, 1),
            b'N' => ("N", false, 1),
            b'O' => ("O", false, 1),
            b'P' => ("P", false, 1),
            b'S' => ("S", false, 1),
            b'F' => ("F", false, 1),
            b'I' => ("I", false, 1),
            b'H' => ("H", false, 1),
            b'b' => ("B", true, 1),
            b'c' => ("C", true, 1),
            b'n' => ("N", true, 1),
            b'o' => ("O", true, 1),
            b'p' => ("P", true, 1),
            b's' => ("S", true, 1),
            _ => return Err(self.err(UnknownSymbol)),
        };
        self.pos += len;
        Ok(RawAtom {
            element: Element::from_symbol(symbol).expect("organic symbol"),
            lowercase,
            charge: 0,
            isotope: None,
            hcount: None,
            pos,
        })
    }

    fn bracket_atom(&mut self) -> Result<RawAtom, ParseError> {
        let pos = self.pos;
        self.pos += 1; // '['
        let isotope = match self.read_number() {
            Some(v) if v == 0 || v > u16::MAX as u32 => return Err(self.err(UnknownSymbol)),
            Some(v) => Some(v as u16),
            None => None,
        };
        let c = self.peek().ok_or_else(|| self.err(UnknownSymbol))?;
        let (element, lowercase) = if c.is_ascii_uppercase() {
            let two = self
                .peek_at(1)
                .filter(u8::is_ascii_lowercase)
                .and_then(|l| Element::from_symbol(std::str::from_utf8(&[c, l]).ok()?));
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    let e = Element::from_symbol(std::str::from_utf8(&[c]).unwrap())
                        .ok_or_else(|| self.err(UnknownSymbol))?;
                    self.pos += 1;
                    (e, false)
                }
            }
        } else {
            let two = match (c, self.peek_at(1)) {
                (b's', Some(b'e')) => Some(Element::SE),
                (b'a', Some(b's')) => Element::from_symbol("As"),
                (b't', Some(b'e')) => Some(Element::TE),
                _ => None,
            };
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, true)
                }
                None => {
                    let e = match c {
                        b'b' => Element::B,
                        b'c' => Element::C,
                        b'n' => Element::N,
                        b'o' => Element::O,
                        b'p' => Element::P,
                        b's' => Element::S,
                        _ => return Err(self.err(UnknownSymbol)),
                    };
                    self.pos += 1;
                    (e, true)
                }
            }
        };
        // chirality, discarded
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
                if matches!(&[a, b], b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    self.pos += 2;
                    self.read_number();
                }
            }
        }
        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hcount = match self.peek() {
                Some(d @ b'0'..=b'9') => {
                    self.pos += 1;
                    d - b'0'
                }
                _ => 1,
            };
        }
        let mut charge: i8 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                if n > 15 {
                    return Err(self.err(UnknownSymbol));
                }
                charge = unit * n as i8;
            } else {
                charge = unit;
                while self.peek() == Some(sign) && charge.abs() < 15 {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(self.err(UnknownSymbol));
            }
        }
        if self.peek() != Some(b']') {
            return Err(self.err(UnknownSymbol));
        }
        self.pos += 1;
        Ok(RawAtom {
            element,
            lowercase,
            charge,
            isotope,
            hcount: Some(hcount),
            pos,
        })
    }

    fn read(&mut self) -> Result<(), ParseError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        // whether the last token allows a ')' (an atom, ring digit or closed branch)
        let mut can_close = false;
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.err(UnknownSymbol));
                    }
                    branches.push((prev, self.pos));
                    self.pos += 1;
                    can_close = false;
                }
                b')' => {
                    let Some((root, _)) = branches.pop() else {
                        return Err(self.err(UnbalancedParen));
                    };
                    if pending.is_some() || !can_close {
                        return Err(self.err(UnknownSymbol));
                    }
                    prev = root;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.err(UnknownSymbol));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    pending = Some((order, self.pos));
                    self.pos += 1;
                    can_close = false;
                }
                b'.' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.err(UnknownSymbol));
                    }
                    prev = None;
                    self.pos += 1;
                    can_close = false;
                }
                b'0'..=b'9' | b'%' => {
                    let pos = self.pos;
                    let Some(atom) = prev else {
                        return Err(self.err(UnknownSymbol));
                    };
                    let label = if c == b'%' {
                        self.pos += 1;
                        let start = self.pos;
                        let n = self.read_number().ok_or_else(|| self.err(UnknownSymbol))?;
                        if self.pos - start != 2 {
                            return Err(ParseError::new(UnknownSymbol, pos));
                        }
                        n
                    } else {
                        self.pos += 1;
                        (c - b'0') as u32
                    };
                    let order = pending.take().map(|(o, _)| o);
                    match self.open_rings.remove(&label) {
                        Some(open) => {
                            let order = match (open.order, order) {
                                (Some(x), Some(y)) if x != y => {
                                    return Err(ParseError::new(UnknownSymbol, pos))
                                }
                                (x, y) => x.or(y),
                            };
                            self.add_bond(open.atom, atom, order, pos)?;
                        }
                        None => {
                            self.open_rings.insert(label, OpenRing { atom, order, pos });
                        }
                    }
                    can_close = true;
                }
                _ => {
                    let raw = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.organic_atom()?
                    };
                    let idx = self.atoms.len();
                    let pos = raw.pos;
                    self.atoms.push(raw);
                    if let Some(p) = prev {
                        let order = pending.take().map(|(o, _)| o);
                        self.add_bond(p, idx, order, pos)?;
                    }
                    pending = None;
                    prev = Some(idx);
                    can_close = true;
                }
            }
        }
        let end = self.input.len();
        if pending.is_some() || (prev.is_none() && !self.atoms.is_empty()) {
            return Err(ParseError::new(UnknownSymbol, end));
        }
        if !branches.is_empty() {
            return Err(ParseError::new(UnbalancedParen, end));
        }
        if let Some(open) = self.open_rings.values().min_by_key(|o| o.pos) {
            return Err(ParseError::new(UnclosedRingBond, open.pos));
        }
        Ok(())
    }
}

/// Hydrogens implied for an organic-subset atom, and whether an aromatic
/// atom still needs a double bond, given the valence of its written bonds.
pub(crate) fn organic_hydrogens(element: Element, aromatic: bool, written: u8) -> (u8, bool) {
    let Some(valences) = element.normal_valences() else {
        return (0, false);
    };
    let Some(&v) = valences.iter().find(|&&v| v >= written) else {
        return (0, false);
    };
    let free = v - written;
    if aromatic && free >= 1 {
        (free - 1, true)
    } else {
        (free, false)
    }
}

/// Whether a bracketed aromatic atom needs a double bond.
pub(crate) fn bracket_needs_double(element: Element, charge: i8, written: u8, h: u8) -> bool {
    let Some(valences) = element.permitted_valences(charge) else {
        return false;
    };
    let used = written + h;
    valences
        .iter()
        .find(|&&v| v >= used)
        .is_some_and(|&v| v > used)
}

/// Parse a SMILES string into a validated, ring- and aromaticity-annotated graph.
pub fn parse(smiles: &str) -> Result<MolecularGraph, ParseError> {
    if smiles.is_empty() {
        return Err(ParseError::new(EmptyInput, 0));
    }
    let mut reader = Reader {
        input: smiles.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        open_rings: BTreeMap::new(),
    };
    reader.read()?;
    let Reader {
        atoms: raw_atoms,
        bonds: raw_bonds,
        ..
    } = reader;

    // resolve implicit orders; bonds typed aromatic only between lowercase atoms
    let bonds: Vec<Bond> = raw_bonds
        .iter()
        .map(|rb| {
            let both = raw_atoms[rb.a].lowercase && raw_atoms[rb.b].lowercase;
            let order = match rb.order {
                None if both => BondOrder::Aromatic,
                Some(BondOrder::Aromatic) if both => BondOrder::Aromatic,
                None | Some(BondOrder::Aromatic) => BondOrder::Single,
                Some(o) => o,
            };
            Bond {
                a: rb.a,
                b: rb.b,
                order,
                in_ring: false,
                kekule: order,
            }
        })
        .collect();
    let atoms: Vec<Atom> = raw_atoms
        .iter()
        .enumerate()
        .map(|(i, r)| Atom {
            element: r.element,
            aromatic: r.lowercase,
            formal_charge: r.charge,
            isotope: r.isotope,
            explicit_h: r.hcount,
            implicit_h: 0,
            index: i,
        })
        .collect();
    let mut g = MolecularGraph::assemble(atoms, bonds, smiles.to_string());

    // aromatic bonds outside rings are plain single bonds
    for b in g.bonds_mut() {
        if b.order == BondOrder::Aromatic && !b.in_ring {
            b.order = BondOrder::Single;
            b.kekule = BondOrder::Single;
        }
    }

    // hydrogens and double-bond demand
    let n = g.atom_count();
    let mut needy = vec![false; n];
    for i in 0..n {
        let written: u8 = g
            .adjacency(i)
            .iter()
            .map(|&(_, bi)| g.bonds()[bi].order.written_valence())
            .sum();
        let raw = &raw_atoms[i];
        match raw.hcount {
            None => {
                let (h, need) = organic_hydrogens(raw.element, raw.lowercase, written);
                g.atoms_mut()[i].implicit_h = h;
                needy[i] = need;
            }
            Some(h) => {
                needy[i] =
                    raw.lowercase && bracket_needs_double(raw.element, raw.charge, written, h);
            }
        }
    }

    // place double bonds among aromatic bonds between needy atoms
    let mut match_adj = vec![Vec::new(); n];
    for b in g.bonds() {
        if b.order == BondOrder::Aromatic && needy[b.a] && needy[b.b] {
            match_adj[b.a].push(b.b);
            match_adj[b.b].push(b.a);
        }
    }
    let mates = maximum_matching(&match_adj);
    if let Some(i) = (0..n).find(|&i| needy[i] && mates[i].is_none()) {
        return Err(ParseError::new(KekulizationFailure, raw_atoms[i].pos));
    }
    for b in g.bonds_mut() {
        if b.order == BondOrder::Aromatic {
            b.kekule = if mates[b.a] == Some(b.b) {
                BondOrder::Double
            } else {
                BondOrder::Single
            };
        }
    }

    // valence gate on the Kekulé structure
    for i in 0..n {
        let atom = &g.atoms()[i];
        let Some(permitted) = atom.element.permitted_valences(atom.formal_charge) else {
            continue;
        };
        let total: u32 = g
            .adjacency(i)
            .iter()
            .map(|&(_, bi)| g.bonds()[bi].kekule.written_valence() as u32)
            .sum::<u32>()
            + atom.total_h() as u32;
        if !permitted.iter().any(|&v| v as u32 == total) {
            return Err(ParseError::new(ValenceViolation, raw_atoms[i].pos));
        }
    }

    aromaticity::apply(&mut g);
    if let Some(i) = (0..n).find(|&i| raw_atoms[i].lowercase && !g.atoms()[i].aromatic) {
        return Err(ParseError::new(KekulizationFailure, raw_atoms[i].pos));
    }
    Ok(g)
}
