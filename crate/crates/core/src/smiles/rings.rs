//! Ring perception: cyclic-edge detection, Horton candidate cycles, SSSR and
//! relevant cycles via GF(2) elimination over edge bitsets.

use std::collections::{HashSet, VecDeque};

#[derive(Debug, Clone)]
pub(crate) struct Cycle {
    pub atoms: Vec<usize>,
    pub edges: Vec<u64>,
}

impl Cycle {
    fn len(&self) -> usize {
        self.atoms.len()
    }
}

/// Edges that lie on at least one cycle (the complement of the bridges).
pub(crate) fn cyclic_edges(n: usize, adjacency: &[Vec<(usize, usize)>], m: usize) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; m];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (vertex, parent edge, next adjacency slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, pe, ref mut slot)) = stack.last_mut() {
            if *slot < adjacency[v].len() {
                let (w, e) = adjacency[v][*slot];
                *slot += 1;
                if e == pe {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, e, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[pe] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|b| !b).collect()
}

fn words(m: usize) -> usize {
    m.div_ceil(64).max(1)
}

/// Horton's candidate set: for every vertex `v` and non-tree edge `(x, y)`,
/// the cycle formed by the BFS-tree paths `v..x`, `y..v` when they meet only at `v`.
fn horton_candidates(
    n: usize,
    edges: &[(usize, usize)],
    adjacency: &[Vec<(usize, usize)>],
    cyclic: &[bool],
) -> Vec<Cycle> {
    let m = edges.len();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::new();
    let cyclic_atom: Vec<bool> = (0..n)
        .map(|v| adjacency[v].iter().any(|&(_, e)| cyclic[e]))
        .collect();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![(usize::MAX, usize::MAX); n];
    let mut mark = vec![usize::MAX; n];
    for v in 0..n {
        if !cyclic_atom[v] {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        let mut queue = VecDeque::from([v]);
        dist[v] = 0;
        parent[v] = (usize::MAX, usize::MAX);
        while let Some(u) = queue.pop_front() {
            for &(w, e) in &adjacency[u] {
                if cyclic[e] && dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = (u, e);
                    queue.push_back(w);
                }
            }
        }
        for (ei, &(x, y)) in edges.iter().enumerate() {
            if !cyclic[ei] || dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].1 == ei || parent[y].1 == ei || dist[x].abs_diff(dist[y]) > 1 {
                continue;
            }
            let path_to = |mut a: usize| {
                let mut p = vec![a];
                while a != v {
                    a = parent[a].0;
                    p.push(a);
                }
                p
            };
            let px = path_to(x);
            let py = path_to(y);
            let stamp = v * m + ei;
            let mut disjoint = true;
            for &a in &px[..px.len() - 1] {
                mark[a] = stamp;
            }
            for &a in &py[..py.len() - 1] {
                if mark[a] == stamp {
                    disjoint = false;
                    break;
                }
            }
            if !disjoint {
                continue;
            }
            // cycle atoms: v .. x, then y .. (child of v)
            let mut atoms: Vec<usize> = px.iter().rev().copied().collect();
            atoms.extend(py[..py.len() - 1].iter().copied());
            if atoms.len() < 3 {
                continue;
            }
            let mut bits = vec![0u64; words(m)];
            for i in 0..atoms.len() {
                let a = atoms[i];
                let b = atoms[(i + 1) % atoms.len()];
                let e = adjacency[a]
                    .iter()
                    .find(|(w, _)| *w == b)
                    .map(|&(_, e)| e)
                    .expect("cycle edge exists");
                bits[e / 64] |= 1 << (e % 64);
            }
            if seen.insert(bits.clone()) {
                out.push(Cycle {
                    atoms: normalize(atoms),
                    edges: bits,
                });
            }
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.atoms.cmp(&b.atoms)));
    out
}

/// Rotate so the smallest index comes first, and orient toward the smaller neighbor.
fn normalize(mut atoms: Vec<usize>) -> Vec<usize> {
    let (pos, _) = atoms.iter().enumerate().min_by_key(|(_, &a)| a).unwrap();
    atoms.rotate_left(pos);
    if atoms.len() > 2 && atoms[atoms.len() - 1] < atoms[1] {
        atoms[1..].reverse();
    }
    atoms
}

#[derive(Default)]
struct Gf2Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Gf2Basis {
    fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
        v
    }

    fn is_independent(&self, v: &[u64]) -> bool {
        self.reduce(v).iter().any(|&w| w != 0)
    }

    fn insert(&mut self, v: &[u64]) -> bool {
        let r = self.reduce(v);
        match r.iter().enumerate().find(|(_, &w)| w != 0) {
            Some((i, &w)) => {
                let pivot = i * 64 + w.trailing_zeros() as usize;
                self.rows.push((pivot, r));
                true
            }
            None => false,
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Smallest set of smallest rings: a minimum cycle basis of size
/// `|bonds| - |atoms| + components`.
pub(crate) fn sssr(
    n: usize,
    edges: &[(usize, usize)],
    adjacency: &[Vec<(usize, usize)>],
    n_components: usize,
) -> Vec<Vec<usize>> {
    let target = (edges.len() + n_components).saturating_sub(n);
    if target == 0 {
        return Vec::new();
    }
    let cyclic = cyclic_edges(n, adjacency, edges.len());
    let mut basis = Gf2Basis::default();
    let mut rings = Vec::with_capacity(target);
    for cycle in horton_candidates(n, edges, adjacency, &cyclic) {
        if basis.insert(&cycle.edges) {
            rings.push(cycle.atoms);
            if basis.rank() == target {
                break;
            }
        }
    }
    rings
}

/// Relevant cycles up to `max_len`: cycles not expressible as a sum of strictly
/// shorter cycles. Unlike an SSSR this set does not depend on atom order.
pub(crate) fn relevant_cycles(
    n: usize,
    edges: &[(usize, usize)],
    adjacency: &[Vec<(usize, usize)>],
    max_len: usize,
) -> Vec<Vec<usize>> {
    let cyclic = cyclic_edges(n, adjacency, edges.len());
    let candidates = horton_candidates(n, edges, adjacency, &cyclic);
    let mut basis = Gf2Basis::default();
    let mut out = Vec::new();
    let mut i = 0;
    while i < candidates.len() && candidates[i].len() <= max_len {
        let len = candidates[i].len();
        let group_end = candidates[i..]
            .iter()
            .position(|c| c.len() != len)
            .map_or(candidates.len(), |p| i + p);
        let group = &candidates[i..group_end];
        for c in group {
            if basis.is_independent(&c.edges) {
                out.push(c.atoms.clone());
            }
        }
        for c in group {
            basis.insert(&c.edges);
        }
        i = group_end;
    }
    out
}
