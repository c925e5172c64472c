//! Extraction of contiguous CNOT/SWAP blocks, their scores and selection.

use std::collections::{BTreeSet, HashSet};

use crate::arch::ArchitectureGraph;
use crate::circuit::{Circuit, Gate, Layering};
use crate::error::Result;
use crate::gf2::GF2Matrix;
use crate::predictor::DepthPredictor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    /// Maximum number of qubits per window.
    pub n_q: usize,
    /// Fraction of scored windows selected for rewriting.
    pub n_t: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams { n_q: 5, n_t: 0.5 }
    }
}

/// A dependency-convex block of linear gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcircuitWindow {
    /// Gate ids in circuit order.
    pub gate_ids: Vec<usize>,
    /// Sorted physical qubits touched by the window.
    pub qubits: Vec<usize>,
    /// Position of the first window gate in the host circuit.
    pub anchor: usize,
    /// Half-open ASAP layer interval covered in the host circuit.
    pub span: (usize, usize),
    /// A lone CNOT, never worth rewriting.
    pub singleton: bool,
}

impl SubcircuitWindow {
    /// Builds the window for `ids` (any order) from the host circuit.
    pub fn from_ids(c: &Circuit, layering: &Layering, ids: &[usize]) -> SubcircuitWindow {
        let pos = c.positions();
        let mut gate_ids = ids.to_vec();
        gate_ids.sort_by_key(|&id| pos[id]);
        let mut qubits = BTreeSet::new();
        let mut cnots = 0;
        let (mut start, mut end) = (usize::MAX, 0);
        for &id in &gate_ids {
            let g = &c.gates()[pos[id]];
            qubits.extend(g.qubits().iter().copied());
            cnots += g.kind.duration();
            start = start.min(layering.layer_of[id]);
            end = end.max(layering.layer_of[id] + g.kind.duration());
        }
        SubcircuitWindow {
            anchor: gate_ids.first().map_or(0, |&id| pos[id]),
            gate_ids,
            qubits: qubits.into_iter().collect(),
            span: (start.min(end), end),
            singleton: cnots == 1,
        }
    }

    pub fn id_set(&self) -> HashSet<usize> {
        self.gate_ids.iter().copied().collect()
    }

    /// Local index of a physical qubit.
    pub fn local(&self, q: usize) -> Option<usize> {
        self.qubits.binary_search(&q).ok()
    }

    /// Window gates relabeled onto `0..qubits.len()`.
    pub fn local_circuit(&self, c: &Circuit) -> Circuit {
        let pos = c.positions();
        let mut out = Circuit::new(self.qubits.len());
        for &id in &self.gate_ids {
            let g = &c.gates()[pos[id]];
            let qs: Vec<usize> = g.qubits().iter().map(|&q| self.local(q).expect("window qubit")).collect();
            out.push(g.kind.clone(), &qs).expect("window gates are valid");
        }
        out
    }

    pub fn matrix(&self, c: &Circuit) -> Result<GF2Matrix> {
        GF2Matrix::from_circuit(&self.local_circuit(c))
    }

    pub fn local_ag(&self, ag: &ArchitectureGraph) -> ArchitectureGraph {
        ag.induced_subgraph(&self.qubits).0
    }

    /// Maps a circuit over local indices back onto the window's qubits.
    pub fn to_physical(&self, local: &Circuit, num_qubits: usize) -> Result<Circuit> {
        let mut out = Circuit::new(num_qubits);
        for g in local.gates() {
            let qs: Vec<usize> = g.qubits().iter().map(|&q| self.qubits[q]).collect();
            out.push(g.kind.clone(), &qs)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcircuitScore {
    pub window: SubcircuitWindow,
    /// Estimated whole-circuit depth gain; `i64::MIN` for singletons.
    pub score: i64,
    pub d_opt_est: usize,
}

struct Block {
    gates: Vec<usize>,
    qubits: BTreeSet<usize>,
    /// Open blocks known to reach this block through the dependency order.
    anc: Vec<usize>,
    last_pos: usize,
    /// Qubits whose latest gate belongs to this block.
    owned: usize,
    open: bool,
    merged: bool,
}

struct Scan {
    blocks: Vec<Block>,
    /// Open block whose gate is the latest on each qubit.
    owner: Vec<Option<usize>>,
    /// Open blocks that are ancestors of (or contain) the latest gate on each qubit.
    reach: Vec<Vec<usize>>,
    n_q: usize,
}

impl Scan {
    fn live(&self, set: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = set.iter().copied().filter(|&b| self.blocks[b].open).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn reaches(&self, q: usize, b: usize) -> bool {
        self.reach[q].contains(&b) && self.blocks[b].open
    }

    /// A block that owns no qubit can never grow again and is closed.
    fn set_owner(&mut self, q: usize, new: Option<usize>) {
        if let Some(old) = self.owner[q] {
            let blk = &mut self.blocks[old];
            blk.owned -= 1;
            if blk.owned == 0 {
                blk.open = false;
            }
        }
        if let Some(b) = new {
            self.blocks[b].owned += 1;
        }
        self.owner[q] = new;
    }

    fn close(&mut self, b: usize) {
        let qs: Vec<usize> = self.blocks[b].qubits.iter().copied().collect();
        for q in qs {
            if self.owner[q] == Some(b) {
                self.set_owner(q, None);
            }
        }
        self.blocks[b].open = false;
    }

    fn fits(&self, blocks: &[usize], qs: &[usize]) -> bool {
        let mut all: BTreeSet<usize> = qs.iter().copied().collect();
        for &b in blocks {
            all.extend(self.blocks[b].qubits.iter().copied());
        }
        all.len() <= self.n_q
    }

    /// `g` may join `b` without an external gate sitting on a path between them.
    fn convex_join(&self, b: usize, qs: &[usize]) -> bool {
        qs.iter().all(|&q| self.owner[q] == Some(b) || !self.reaches(q, b))
    }

    fn merge(&mut self, keep: usize, gone: usize) {
        for &q in &self.blocks[gone].qubits {
            if self.owner[q] == Some(gone) {
                self.owner[q] = Some(keep);
            }
        }
        let moved = std::mem::take(&mut self.blocks[gone].gates);
        let qubits = std::mem::take(&mut self.blocks[gone].qubits);
        let anc = std::mem::take(&mut self.blocks[gone].anc);
        let (last, owned) = (self.blocks[gone].last_pos, self.blocks[gone].owned);
        let g = &mut self.blocks[gone];
        g.open = false;
        g.merged = true;
        g.owned = 0;
        let k = &mut self.blocks[keep];
        k.gates.extend(moved);
        k.qubits.extend(qubits);
        k.anc.extend(anc);
        k.last_pos = k.last_pos.max(last);
        k.owned += owned;
        let rename = |v: &mut Vec<usize>| {
            for x in v.iter_mut() {
                if *x == gone {
                    *x = keep;
                }
            }
        };
        for r in &mut self.reach {
            rename(r);
        }
        for blk in &mut self.blocks {
            if blk.open {
                rename(&mut blk.anc);
            }
        }
        let anc = self.live(&self.blocks[keep].anc);
        self.blocks[keep].anc = anc.into_iter().filter(|&a| a != keep).collect();
    }

    fn push(&mut self, b: Option<usize>, g: &Gate, pos: usize) {
        let qs = g.qubits();
        let mut preds: Vec<usize> = qs.iter().flat_map(|&q| self.reach[q].iter().copied()).collect();
        preds = self.live(&preds);
        let b = b.unwrap_or_else(|| {
            self.blocks.push(Block {
                gates: Vec::new(),
                qubits: BTreeSet::new(),
                anc: Vec::new(),
                last_pos: pos,
                owned: 0,
                open: true,
                merged: false,
            });
            self.blocks.len() - 1
        });
        let blk = &mut self.blocks[b];
        blk.gates.push(g.id);
        blk.qubits.extend(qs.iter().copied());
        blk.last_pos = pos;
        blk.anc.extend(preds.iter().copied().filter(|&a| a != b));
        // claim ownership first so `b` is not closed while others lose theirs
        for &q in qs {
            if self.owner[q] != Some(b) {
                self.blocks[b].owned += 1;
                let old = self.owner[q].replace(b);
                if let Some(old) = old {
                    let o = &mut self.blocks[old];
                    o.owned -= 1;
                    if o.owned == 0 {
                        o.open = false;
                    }
                }
            }
        }
        let mut frontier = self.live(&preds);
        frontier.push(b);
        frontier.sort_unstable();
        frontier.dedup();
        for &q in qs {
            self.reach[q] = frontier.clone();
        }
    }

    fn linear(&mut self, g: &Gate, pos: usize) {
        let qs = g.qubits();
        let mut cands: Vec<usize> = qs.iter().filter_map(|&q| self.owner[q]).collect();
        cands.dedup();
        match cands.as_slice() {
            [] => self.push(None, g, pos),
            [b] => self.join_or_open(*b, g, pos),
            [b1, b2] => {
                let (b1, b2) = (*b1, *b2);
                let independent = !self.blocks[b1].anc.contains(&b2) && !self.blocks[b2].anc.contains(&b1);
                if independent && self.fits(&[b1, b2], qs) {
                    self.merge(b1, b2);
                    self.push(Some(b1), g, pos);
                } else {
                    let (older, newer) = if self.blocks[b1].last_pos < self.blocks[b2].last_pos {
                        (b1, b2)
                    } else {
                        (b2, b1)
                    };
                    self.close(older);
                    self.join_or_open(newer, g, pos);
                }
            }
            _ => unreachable!("gates act on at most two qubits"),
        }
    }

    fn join_or_open(&mut self, b: usize, g: &Gate, pos: usize) {
        let qs = g.qubits();
        if !self.fits(&[b], qs) {
            self.close(b);
            self.push(None, g, pos);
        } else if self.convex_join(b, qs) {
            self.push(Some(b), g, pos);
        } else {
            self.push(None, g, pos);
        }
    }
}

/// Greedy left-to-right scan partitioning the linear gates into convex
/// blocks of at most `n_q` qubits, returned in order of their first gate.
pub fn extract_subcircuits(c: &Circuit, n_q: usize) -> Vec<SubcircuitWindow> {
    let mut scan = Scan {
        blocks: Vec::new(),
        owner: vec![None; c.num_qubits],
        reach: vec![Vec::new(); c.num_qubits],
        n_q: n_q.max(2),
    };
    for (pos, g) in c.gates().iter().enumerate() {
        if g.kind.is_linear() {
            scan.linear(g, pos);
        } else {
            scan.set_owner(g.qubits()[0], None);
        }
    }
    let layering = c.layering();
    let mut windows: Vec<SubcircuitWindow> = scan
        .blocks
        .iter()
        .filter(|b| !b.merged)
        .map(|b| SubcircuitWindow::from_ids(c, &layering, &b.gates))
        .collect();
    windows.sort_by_key(|w| w.anchor);
    windows
}

/// Number of extracted windows, singletons included.
pub fn count_sub(c: &Circuit, n_q: usize) -> usize {
    extract_subcircuits(c, n_q).len()
}

/// `depth(C) - depth(C without window) - d_opt`.
pub fn score_window(
    c: &Circuit,
    ag: &ArchitectureGraph,
    w: &SubcircuitWindow,
    predictor: &dyn DepthPredictor,
) -> Result<SubcircuitScore> {
    if w.singleton {
        return Ok(SubcircuitScore { window: w.clone(), score: i64::MIN, d_opt_est: 1 });
    }
    let d_opt = predictor.predict(&w.matrix(c)?, &w.local_ag(ag))?;
    let removed = c.without(&w.id_set()).depth();
    let score = c.depth() as i64 - removed as i64 - d_opt as i64;
    Ok(SubcircuitScore { window: w.clone(), score, d_opt_est: d_opt })
}

/// The `ceil(n_t * k)` best non-singleton windows (k = their count),
/// highest score first, ties broken by earlier anchor.
pub fn select_top(scores: &[SubcircuitScore], n_t: f64) -> Vec<SubcircuitWindow> {
    let mut eligible: Vec<&SubcircuitScore> = scores.iter().filter(|s| s.score != i64::MIN).collect();
    eligible.sort_by(|a, b| b.score.cmp(&a.score).then(a.window.anchor.cmp(&b.window.anchor)));
    let k = (n_t.clamp(0.0, 1.0) * eligible.len() as f64).ceil() as usize;
    eligible.into_iter().take(k).map(|s| s.window.clone()).collect()
}
