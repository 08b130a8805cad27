//! Maximum matching on general graphs (Edmonds' blossom algorithm), used to
//! place double bonds in lowercase aromatic input.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;

struct Blossom<'a> {
    adj: &'a [Vec<usize>],
    mate: Vec<usize>,
    parent: Vec<usize>,
    base: Vec<usize>,
    used: Vec<bool>,
    in_blossom: Vec<bool>,
}

impl<'a> Blossom<'a> {
    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut seen = vec![false; self.adj.len()];
        loop {
            a = self.base[a];
            seen[a] = true;
            if self.mate[a] == NONE {
                break;
            }
            a = self.parent[self.mate[a]];
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            b = self.parent[self.mate[b]];
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize) {
        while self.base[v] != b {
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[self.mate[v]]] = true;
            self.parent[v] = child;
            child = self.mate[v];
            v = self.parent[self.mate[v]];
        }
    }

    fn find_path(&mut self, root: usize) -> usize {
        let n = self.adj.len();
        self.used.iter_mut().for_each(|u| *u = false);
        self.parent.iter_mut().for_each(|p| *p = NONE);
        for (i, b) in self.base.iter_mut().enumerate() {
            *b = i;
        }
        self.used[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for idx in 0..self.adj[v].len() {
                let to = self.adj[v][idx];
                if self.base[v] == self.base[to] || self.mate[v] == to {
                    continue;
                }
                if to == root || (self.mate[to] != NONE && self.parent[self.mate[to]] != NONE) {
                    let cur = self.lca(v, to);
                    self.in_blossom.iter_mut().for_each(|b| *b = false);
                    self.mark_path(v, cur, to);
                    self.mark_path(to, cur, v);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.used[i] {
                                self.used[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to] == NONE {
                    self.parent[to] = v;
                    if self.mate[to] == NONE {
                        return to;
                    }
                    let next = self.mate[to];
                    self.used[next] = true;
                    queue.push_back(next);
                }
            }
        }
        NONE
    }
}

/// Maximum-cardinality matching. `adj` lists neighbors per vertex; the result
/// gives each vertex's mate, if any.
pub(crate) fn maximum_matching(adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = adj.len();
    let mut bl = Blossom {
        adj,
        mate: vec![NONE; n],
        parent: vec![NONE; n],
        base: (0..n).collect(),
        used: vec![false; n],
        in_blossom: vec![false; n],
    };
    // greedy start
    for v in 0..n {
        if bl.mate[v] == NONE {
            if let Some(&w) = adj[v].iter().find(|&&w| bl.mate[w] == NONE && w != v) {
                bl.mate[v] = w;
                bl.mate[w] = v;
            }
        }
    }
    for v in 0..n {
        if bl.mate[v] != NONE || adj[v].is_empty() {
            continue;
        }
        let mut u = bl.find_path(v);
        while u != NONE {
            let pv = bl.parent[u];
            let ppv = bl.mate[pv];
            bl.mate[u] = pv;
            bl.mate[pv] = u;
            u = ppv;
        }
    }
    bl.mate
        .into_iter()
        .map(|m| (m != NONE).then_some(m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut a = vec![Vec::new(); n];
        for &(x, y) in edges {
            a[x].push(y);
            a[y].push(x);
        }
        a
    }

    fn size(m: &[Option<usize>]) -> usize {
        m.iter().filter(|x| x.is_some()).count() / 2
    }

    #[test]
    fn hexagon_is_perfect() {
        let g = adj(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let m = maximum_matching(&g);
        assert_eq!(size(&m), 3);
        for (v, w) in m.iter().enumerate() {
            assert_eq!(m[w.unwrap()], Some(v));
        }
    }

    #[test]
    fn pentagon_leaves_one() {
        let g = adj(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!(size(&maximum_matching(&g)), 2);
    }

    fn brute(n: usize, edges: &[(usize, usize)], used: &mut Vec<bool>, from: usize) -> usize {
        let mut best = 0;
        for (k, &(x, y)) in edges.iter().enumerate().skip(from) {
            if !used[x] && !used[y] {
                used[x] = true;
                used[y] = true;
                best = best.max(1 + brute(n, edges, used, k + 1));
                used[x] = false;
                used[y] = false;
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn matches_exhaustive_search(n in 2usize..10, raw in proptest::collection::vec((0usize..10, 0usize..10), 0..16)) {
            let mut edges: Vec<(usize, usize)> = raw
                .into_iter()
                .map(|(x, y)| (x % n, y % n))
                .filter(|(x, y)| x != y)
                .map(|(x, y)| (x.min(y), x.max(y)))
                .collect();
            edges.sort_unstable();
            edges.dedup();
            let m = maximum_matching(&adj(n, &edges));
            for (v, w) in m.iter().enumerate() {
                if let Some(w) = w {
                    proptest::prop_assert_eq!(m[*w], Some(v));
                    proptest::prop_assert!(edges.contains(&(v.min(*w), v.max(*w))));
                }
            }
            proptest::prop_assert_eq!(size(&m), brute(n, &edges, &mut vec![false; n], 0));
        }
    }
}
