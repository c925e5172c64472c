//! Exhaustive breadth-first search over CNOT layers, the independent
//! optimality oracle for windows of at most five qubits.
//!
//! States are matrices packed row-major into `n*n` bits; one step applies a
//! non-empty set of qubit-disjoint CNOTs on graph edges.

use std::sync::atomic::{AtomicU8, Ordering};

use rayon::prelude::*;

use super::cnf::BlockedPosition;
use crate::arch::ArchitectureGraph;
use crate::error::{Error, Result};
use crate::gf2::GF2Matrix;

pub const MAX_BFS_QUBITS: usize = 5;
const UNSEEN: u8 = u8::MAX;

type Move = Vec<(usize, usize)>;

/// All non-empty matchings of directed edges avoiding the qubits in `busy`.
pub fn layer_moves(ag: &ArchitectureGraph, busy: u32) -> Vec<Move> {
    let edges: Vec<(usize, usize)> = ag
        .directed_edges()
        .into_iter()
        .filter(|&(c, t)| busy >> c & 1 == 0 && busy >> t & 1 == 0)
        .collect();
    let mut out = Vec::new();
    fn rec(edges: &[(usize, usize)], from: usize, used: u32, cur: &mut Move, out: &mut Vec<Move>) {
        for i in from..edges.len() {
            let (c, t) = edges[i];
            let mask = 1 << c | 1 << t;
            if used & mask == 0 {
                cur.push((c, t));
                out.push(cur.clone());
                rec(edges, i + 1, used | mask, cur, out);
                cur.pop();
            }
        }
    }
    rec(&edges, 0, 0, &mut Vec::new(), &mut out);
    out
}

fn apply(state: u32, n: usize, mv: &Move) -> u32 {
    let mask = (1u32 << n) - 1;
    let mut s = state;
    for &(c, t) in mv {
        s ^= (s >> (c * n) & mask) << (t * n);
    }
    s
}

fn pack(m: &GF2Matrix) -> u32 {
    m.pack() as u32
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_BFS_QUBITS {
        Err(Error::TooManyQubits(n))
    } else {
        Ok(())
    }
}

/// Optimal layer count of every matrix reachable on one graph.
#[derive(Debug, Clone)]
pub struct DepthTable {
    n: usize,
    dist: Vec<u8>,
}

impl DepthTable {
    pub fn build(ag: &ArchitectureGraph) -> Result<DepthTable> {
        let n = ag.num_qubits();
        check_size(n)?;
        let moves = layer_moves(ag, 0);
        let dist: Vec<AtomicU8> = (0..1usize << (n * n)).map(|_| AtomicU8::new(UNSEEN)).collect();
        let start = pack(&GF2Matrix::identity(n));
        dist[start as usize].store(0, Ordering::Relaxed);
        let mut frontier = vec![start];
        let mut level = 0u8;
        while !frontier.is_empty() {
            level += 1;
            frontier = frontier
                .par_chunks(4096)
                .map(|chunk| {
                    let mut next = Vec::new();
                    for &s in chunk {
                        for mv in &moves {
                            let t = apply(s, n, mv);
                            if dist[t as usize].load(Ordering::Relaxed) == UNSEEN
                                && dist[t as usize]
                                    .compare_exchange(UNSEEN, level, Ordering::Relaxed, Ordering::Relaxed)
                                    .is_ok()
                            {
                                next.push(t);
                            }
                        }
                    }
                    next
                })
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                });
        }
        Ok(DepthTable { n, dist: dist.into_iter().map(AtomicU8::into_inner).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Minimal layer count, or `None` when unreachable on this graph.
    pub fn depth(&self, m: &GF2Matrix) -> Option<usize> {
        if m.n() != self.n {
            return None;
        }
        match self.dist[pack(m) as usize] {
            UNSEEN => None,
            d => Some(d as usize),
        }
    }

    /// Every reachable matrix with its depth, in packed order.
    pub fn reachable(&self) -> impl Iterator<Item = (GF2Matrix, usize)> + '_ {
        self.dist
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != UNSEEN)
            .map(|(bits, &d)| (GF2Matrix::unpack(self.n, bits as u64), d as usize))
    }

    pub fn max_depth(&self) -> usize {
        self.dist.iter().filter(|&&d| d != UNSEEN).map(|&d| d as usize).max().unwrap_or(0)
    }
}

/// Minimal number of layers reaching `target`, honoring blocked slots.
/// Returns `None` if not reachable within `max_depth`.
pub fn bfs_oracle(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    max_depth: usize,
    blocked: Option<&[BlockedPosition]>,
) -> Result<Option<usize>> {
    let n = target.n();
    check_size(n)?;
    if ag.num_qubits() != n {
        return Err(Error::Dimension(format!("{n}-qubit target on a {}-node graph", ag.num_qubits())));
    }
    let goal = pack(target);
    let blocked = blocked.unwrap_or(&[]);
    if blocked.is_empty() {
        let d = DepthTable::build(ag)?.depth(target);
        return Ok(d.filter(|&d| d <= max_depth));
    }
    let start = pack(&GF2Matrix::identity(n));
    let size = 1usize << (n * n);
    let mut frontier = vec![start];
    let mut seen = vec![0u64; size.div_ceil(64)];
    for d in 0..=max_depth {
        if frontier.contains(&goal) {
            return Ok(Some(d));
        }
        if d == max_depth {
            break;
        }
        let busy = blocked.iter().filter(|b| b.d == d).fold(0u32, |acc, b| acc | 1 << b.q);
        // an idle layer is allowed while the surrounding circuit holds the slots
        let mut moves = layer_moves(ag, busy);
        moves.push(Vec::new());
        seen.iter_mut().for_each(|w| *w = 0);
        let mut next = Vec::new();
        for &s in &frontier {
            for mv in &moves {
                let t = apply(s, n, mv) as usize;
                if seen[t / 64] >> (t % 64) & 1 == 0 {
                    seen[t / 64] |= 1 << (t % 64);
                    next.push(t as u32);
                }
            }
        }
        frontier = next;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let p3 = ArchitectureGraph::path(3);
        let t = DepthTable::build(&p3).unwrap();
        assert_eq!(t.depth(&GF2Matrix::identity(3)), Some(0));
        assert_eq!(t.depth(&GF2Matrix::identity(3).apply_cnot(0, 1).unwrap()), Some(1));
        assert_eq!(t.depth(&GF2Matrix::parse("100\n110\n111").unwrap()), Some(2));
        // the whole group is reachable on a connected graph
        assert_eq!(t.reachable().count(), 168);
        assert_eq!(bfs_oracle(&GF2Matrix::parse("100\n110\n111").unwrap(), &p3, 10, None).unwrap(), Some(2));
    }

    #[test]
    fn moves_are_matchings() {
        assert_eq!(layer_moves(&ArchitectureGraph::path(3), 0).len(), 4);
        assert_eq!(layer_moves(&ArchitectureGraph::path(3), 0b010).len(), 0);
        // path(5): 8 single gates, 12 disjoint pairs
        assert_eq!(layer_moves(&ArchitectureGraph::path(5), 0).len(), 20);
    }

    #[test]
    fn swap_needs_three_layers() {
        let swap = GF2Matrix::parse("01\n10").unwrap();
        assert_eq!(bfs_oracle(&swap, &ArchitectureGraph::path(2), 10, None).unwrap(), Some(3));
        // the blocked first layer is spent idle
        let blocked = [BlockedPosition { d: 0, q: 0 }];
        assert_eq!(bfs_oracle(&swap, &ArchitectureGraph::path(2), 10, Some(&blocked)).unwrap(), Some(4));
        assert_eq!(bfs_oracle(&swap, &ArchitectureGraph::path(2), 3, Some(&blocked)).unwrap(), None);
        let blocked = [BlockedPosition { d: 3, q: 0 }];
        assert_eq!(bfs_oracle(&swap, &ArchitectureGraph::path(2), 10, Some(&blocked)).unwrap(), Some(3));
    }

    #[test]
    fn rejects_large_graphs() {
        assert_eq!(DepthTable::build(&ArchitectureGraph::path(6)).unwrap_err(), Error::TooManyQubits(6));
    }
}
