//! Qubit connectivity graphs.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Undirected connectivity graph over physical qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureGraph {
    num_qubits: usize,
    edges: BTreeSet<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ArchitectureGraph {
    pub fn new(num_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGate(format!("self-loop on node {a}")));
            }
            for x in [a, b] {
                if x >= num_qubits {
                    return Err(Error::QubitOutOfRange { index: x, num_qubits });
                }
            }
            set.insert(norm(a, b));
        }
        let mut adj = vec![Vec::new(); num_qubits];
        for &(a, b) in &set {
            adj[a].push(b);
            adj[b].push(a);
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        Ok(ArchitectureGraph { num_qubits, edges: set, adj })
    }

    /// `rows × cols` lattice, nodes in row-major order.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, edges).expect("grid edges are valid")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::new(n, edges).expect("cycle edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::new(n, edges).expect("complete edges are valid")
    }

    pub fn sycamore() -> Self {
        Self::from_edge_list(include_str!("../data/sycamore54.edges")).expect("bundled file parses")
    }

    pub fn rochester() -> Self {
        Self::from_edge_list(include_str!("../data/rochester53.edges")).expect("bundled file parses")
    }

    pub fn heron() -> Self {
        Self::from_edge_list(include_str!("../data/heron156.edges")).expect("bundled file parses")
    }

    /// Parses the edge-list format: node count on the first line, then one
    /// `a b` pair per line. `#` starts a comment; duplicates are merged.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut count = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::EdgeList { line: line_no, msg: msg.to_string() };
            let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("`{s}` is not an index")));
            match (count, fields.as_slice()) {
                (None, [n]) => count = Some(parse(n)?),
                (None, _) => return Err(bad("expected node count")),
                (Some(n), [a, b]) => {
                    let (a, b) = (parse(a)?, parse(b)?);
                    if a >= n || b >= n {
                        return Err(bad(&format!("index out of range for {n} nodes")));
                    }
                    if a == b {
                        return Err(bad("self-loop"));
                    }
                    edges.push((a, b));
                }
                (Some(_), _) => return Err(bad("expected `a b`")),
            }
        }
        let n = count.ok_or(Error::EdgeList { line: 1, msg: "missing node count".into() })?;
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.num_qubits);
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adj[q]
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&norm(a, b))
    }

    /// Both orientations of every edge, sorted.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        v.sort_unstable();
        v
    }

    /// Relabels `qubits[i]` to `i`, keeping the edges among them.
    pub fn induced_subgraph(&self, qubits: &[usize]) -> (ArchitectureGraph, Vec<usize>) {
        let mut edges = Vec::new();
        for (i, &a) in qubits.iter().enumerate() {
            for (j, &b) in qubits.iter().enumerate().skip(i + 1) {
                if self.is_edge(a, b) {
                    edges.push((i, j));
                }
            }
        }
        let g = ArchitectureGraph::new(qubits.len(), edges).expect("relabeled edges are valid");
        (g, qubits.to_vec())
    }

    /// Same graph with isolated nodes appended up to `n`.
    pub fn padded(&self, n: usize) -> ArchitectureGraph {
        let n = n.max(self.num_qubits);
        ArchitectureGraph::new(n, self.edges.iter().copied()).expect("padding keeps edges valid")
    }

    /// Shortest path from `a` to `b` (inclusive), if any.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.num_qubits];
        let mut queue = VecDeque::from([a]);
        prev[a] = a;
        while let Some(v) = queue.pop_front() {
            if v == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &self.adj[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub fn is_connected(&self) -> bool {
        self.num_qubits == 0 || (1..self.num_qubits).all(|b| self.shortest_path(0, b).is_some())
    }

    /// Isomorphism-invariant key for graphs of at most five nodes.
    pub fn canonical_key(&self) -> Result<String> {
        self.canonical_form().map(|f| f.key)
    }

    /// Canonical labeling: the relabeling minimizing the upper-triangle
    /// adjacency bitstring over all node permutations.
    pub fn canonical_form(&self) -> Result<CanonicalForm> {
        let n = self.num_qubits;
        if n > 5 {
            return Err(Error::TooManyQubits(n));
        }
        let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        permutations(&mut perm, 0, &mut |p| {
            // p[v] = canonical label of node v
            let mut inv = vec![0; n];
            for (v, &c) in p.iter().enumerate() {
                inv[c] = v;
            }
            let mut bits = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    bits.push(self.is_edge(inv[i], inv[j]) as u8);
                }
            }
            if best.as_ref().is_none_or(|(b, _)| bits < *b) {
                best = Some((bits, p.to_vec()));
            }
        });
        let (bits, perm) = best.expect("at least one permutation");
        let bits: String = bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
        Ok(CanonicalForm { key: format!("{n}:{bits}"), perm })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub key: String,
    /// `perm[v]` is the canonical label of node `v`.
    pub perm: Vec<usize>,
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn grid_counts() {
        let g = ArchitectureGraph::grid(5, 4);
        assert_eq!((g.num_qubits(), g.edge_count()), (20, 31));
        let g = ArchitectureGraph::grid(1, 1);
        assert_eq!((g.num_qubits(), g.edge_count()), (1, 0));
        let g = ArchitectureGraph::grid(3, 3);
        assert_eq!((g.num_qubits(), g.edge_count()), (9, 12));
        // brute force over all pairs
        let g = ArchitectureGraph::grid(5, 4);
        let mut n = 0;
        for a in 0usize..20 {
            for b in a + 1..20 {
                let (ra, ca, rb, cb) = (a / 4, a % 4, b / 4, b % 4);
                if ra.abs_diff(rb) + ca.abs_diff(cb) == 1 {
                    assert!(g.is_edge(a, b));
                    n += 1;
                }
            }
        }
        assert_eq!(n, 31);
    }

    #[test]
    fn edge_list_parsing() {
        let g = ArchitectureGraph::from_edge_list("3\n0 1\n1 2\n").unwrap();
        assert_eq!(g, ArchitectureGraph::path(3));
        let g = ArchitectureGraph::from_edge_list("# header\n3 # nodes\n0 1\n1 0\n\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(matches!(
            ArchitectureGraph::from_edge_list("3\n0 5\n"),
            Err(Error::EdgeList { line: 2, .. })
        ));
        assert!(matches!(
            ArchitectureGraph::from_edge_list("3\n0 1 2\n"),
            Err(Error::EdgeList { line: 2, .. })
        ));
        assert!(matches!(ArchitectureGraph::from_edge_list("x\n"), Err(Error::EdgeList { line: 1, .. })));
        let g = ArchitectureGraph::grid(2, 3);
        assert_eq!(ArchitectureGraph::from_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn bundled_devices() {
        let s = ArchitectureGraph::sycamore();
        assert_eq!(s.num_qubits(), 54);
        assert!(s.is_connected());
        assert_eq!(ArchitectureGraph::rochester().num_qubits(), 53);
        let h = ArchitectureGraph::heron();
        assert_eq!(h.num_qubits(), 156);
        assert!(h.is_connected());
    }

    #[test]
    fn induced_subgraphs() {
        let (g, map) = ArchitectureGraph::path(3).induced_subgraph(&[0, 1]);
        assert_eq!(g, ArchitectureGraph::path(2));
        assert_eq!(map, vec![0, 1]);
        let (g, _) = ArchitectureGraph::grid(2, 2).induced_subgraph(&[0, 1, 3, 2]);
        assert_eq!(g, ArchitectureGraph::cycle(4));
        let (g, _) = ArchitectureGraph::path(3).induced_subgraph(&[0, 2]);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.num_qubits(), 2);
    }

    #[test]
    fn canonical_keys() {
        let p = ArchitectureGraph::path(3);
        let p2 = ArchitectureGraph::new(3, [(0, 2), (2, 1)]).unwrap();
        assert_eq!(p.canonical_key().unwrap(), p2.canonical_key().unwrap());
        assert_ne!(p.canonical_key().unwrap(), ArchitectureGraph::complete(3).canonical_key().unwrap());
        assert!(matches!(ArchitectureGraph::path(6).canonical_key(), Err(Error::TooManyQubits(6))));
    }

    #[test]
    fn canonical_perm_maps_onto_canonical_graph() {
        let g = ArchitectureGraph::new(4, [(3, 0), (0, 2)]).unwrap();
        let f = g.canonical_form().unwrap();
        let relabeled = ArchitectureGraph::new(4, g.edges().map(|(a, b)| (f.perm[a], f.perm[b]))).unwrap();
        assert_eq!(relabeled.canonical_form().unwrap().key, f.key);
        let ident: Vec<usize> = (0..4).collect();
        assert_eq!(relabeled.canonical_form().unwrap().perm, ident);
    }

    #[test]
    fn twenty_one_connected_classes_on_five_nodes() {
        let pairs: Vec<(usize, usize)> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let mut keys = HashSet::new();
        for mask in 0u32..1 << pairs.len() {
            let edges = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e);
            let g = ArchitectureGraph::new(5, edges).unwrap();
            if g.is_connected() {
                keys.insert(g.canonical_key().unwrap());
            }
        }
        assert_eq!(keys.len(), 21);
    }
}
