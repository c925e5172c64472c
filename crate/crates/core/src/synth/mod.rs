//! Depth-optimal CNOT synthesis by repeated SAT queries.

pub mod bfs;
pub mod cnf;
pub mod solver;

use crate::arch::ArchitectureGraph;
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gf2::GF2Matrix;
use crate::sweep::SubcircuitWindow;

pub use bfs::{bfs_oracle, DepthTable};
pub use cnf::{decode, encode, BlockedPosition, Cnf, CnfInstance, CnfVariable};
pub use solver::{Cadical, Varisat, SatBackend, SatOutcome, Subprocess};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisResult {
    /// CNOT-only circuit on the window's local qubits, in layer order.
    pub circuit: Circuit,
    /// Smallest layer budget found satisfiable.
    pub achieved_depth: usize,
    /// Layer index of each gate of `circuit`, by position.
    pub layer_of: Vec<usize>,
    pub sat_calls: usize,
}

/// Hard upper bound for the upward search on `n` qubits.
pub fn depth_cap(n: usize) -> usize {
    (n * n).max(1)
}

struct Trial {
    circuit: Circuit,
    layer_of: Vec<usize>,
}

/// Layers below `depth` where some edge has both ends free, and the blocked
/// slots renumbered onto them. The other layers are necessarily idle.
fn usable(ag: &ArchitectureGraph, blocked: &[BlockedPosition], depth: usize) -> (Vec<usize>, Vec<BlockedPosition>) {
    if blocked.is_empty() {
        return ((0..depth).collect(), Vec::new());
    }
    let mut busy = vec![0u64; depth];
    for b in blocked.iter().filter(|b| b.d < depth) {
        busy[b.d] |= 1 << b.q;
    }
    let kept: Vec<usize> = (0..depth)
        .filter(|&d| ag.edges().any(|(a, b)| busy[d] >> a & 1 == 0 && busy[d] >> b & 1 == 0))
        .collect();
    let mut out = Vec::new();
    for (i, &d) in kept.iter().enumerate() {
        out.extend((0..ag.num_qubits()).filter(|&q| busy[d] >> q & 1 == 1).map(|q| BlockedPosition { d: i, q }));
    }
    (kept, out)
}

fn trial(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    blocked: &[BlockedPosition],
    depth: usize,
    backend: &dyn SatBackend,
) -> Result<Option<Trial>> {
    let (kept, blocked) = usable(ag, blocked, depth);
    let inst = encode(target, ag, kept.len(), &blocked);
    match backend.solve(&inst.cnf)? {
        SatOutcome::Unsat => Ok(None),
        SatOutcome::Sat(model) => {
            let layers = cnf::decode_layers(&inst, &model)?;
            let mut circuit = Circuit::new(target.n());
            let mut layer_of = Vec::new();
            for (i, layer) in layers.iter().enumerate() {
                for &(c, t) in layer {
                    circuit.push(crate::circuit::GateKind::Cnot, &[c, t])?;
                    layer_of.push(kept[i]);
                }
            }
            if GF2Matrix::from_circuit(&circuit)? != *target {
                return Err(Error::Invariant("decoded circuit does not implement the target".into()));
            }
            Ok(Some(Trial { circuit, layer_of }))
        }
    }
}

/// One satisfiability query: can `target` be built within `depth` layers?
pub fn satisfiable(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    blocked: &[BlockedPosition],
    depth: usize,
    backend: &dyn SatBackend,
) -> Result<bool> {
    let (kept, blocked) = usable(ag, blocked, depth);
    Ok(backend.solve(&encode(target, ag, kept.len(), &blocked).cnf)?.is_sat())
}

/// Predictor-guided search: try `d_pred` first, then walk down while
/// satisfiable or up until satisfiable, never beyond `cap`.
pub fn synthesize_capped(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    blocked: &[BlockedPosition],
    d_pred: usize,
    cap: usize,
    backend: &dyn SatBackend,
) -> Result<SynthesisResult> {
    if !target.is_invertible() {
        return Err(Error::Singular);
    }
    let mut calls = 0;
    let mut d = d_pred.min(cap);
    calls += 1;
    let first = trial(target, ag, blocked, d, backend)?;
    let (best, depth) = match first {
        Some(t) => {
            let mut best = (t, d);
            while d > 0 {
                d -= 1;
                calls += 1;
                match trial(target, ag, blocked, d, backend)? {
                    Some(t) => best = (t, d),
                    None => break,
                }
            }
            best
        }
        None => loop {
            d += 1;
            if d > cap {
                return Err(Error::DepthCapExceeded(cap));
            }
            calls += 1;
            if let Some(t) = trial(target, ag, blocked, d, backend)? {
                break (t, d);
            }
        },
    };
    Ok(SynthesisResult { circuit: best.circuit, achieved_depth: depth, layer_of: best.layer_of, sat_calls: calls })
}

pub fn synthesize(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    blocked: &[BlockedPosition],
    d_pred: usize,
    backend: &dyn SatBackend,
) -> Result<SynthesisResult> {
    synthesize_capped(target, ag, blocked, d_pred, depth_cap(target.n()), backend)
}

/// Baseline without a prediction: budgets 1, 2, 3, ... until satisfiable.
pub fn synthesize_from_one(
    target: &GF2Matrix,
    ag: &ArchitectureGraph,
    blocked: &[BlockedPosition],
    backend: &dyn SatBackend,
) -> Result<SynthesisResult> {
    let cap = depth_cap(target.n());
    for d in 1..=cap {
        if let Some(t) = trial(target, ag, blocked, d, backend)? {
            return Ok(SynthesisResult { circuit: t.circuit, achieved_depth: d, layer_of: t.layer_of, sat_calls: d });
        }
    }
    Err(Error::DepthCapExceeded(cap))
}

/// Host-circuit timing around a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowTiming {
    /// First layer of the window in the host ASAP schedule.
    pub start: usize,
    /// Per local qubit: layer at which external predecessors release it.
    pub ready: Vec<usize>,
    /// Per local qubit: layers needed after the window by its external successors.
    pub tail: Vec<usize>,
    /// Longest dependency path through any window gate.
    pub through: usize,
}

/// Computes ready times and successor tails of the window's qubits.
pub fn window_timing(c: &Circuit, w: &SubcircuitWindow) -> WindowTiming {
    let gates = c.gates();
    let layering = c.layering();
    let inw = w.id_set();
    // longest path from each gate's start to the end of the circuit
    let mut tail_from = vec![0usize; gates.len()];
    let mut after = vec![0usize; c.num_qubits];
    for (p, g) in gates.iter().enumerate().rev() {
        let rest = g.qubits().iter().map(|&q| after[q]).max().unwrap_or(0);
        tail_from[p] = rest + g.kind.duration();
        for &q in g.qubits() {
            after[q] = tail_from[p];
        }
    }
    let k = w.qubits.len();
    let mut ready = vec![0usize; k];
    let mut tail = vec![0usize; k];
    let mut seen_window = vec![false; k];
    let mut last_window = vec![usize::MAX; k];
    for (p, g) in gates.iter().enumerate() {
        for &q in g.qubits() {
            if let Some(l) = w.local(q) {
                if inw.contains(&g.id) {
                    seen_window[l] = true;
                    last_window[l] = p;
                } else if !seen_window[l] {
                    ready[l] = ready[l].max(layering.layer_of[g.id] + g.kind.duration());
                }
            }
        }
    }
    for l in 0..k {
        let q = w.qubits[l];
        if last_window[l] != usize::MAX {
            if let Some(p) = (last_window[l] + 1..gates.len()).find(|&p| gates[p].acts_on(q)) {
                tail[l] = tail_from[p];
            }
        }
    }
    let through = gates
        .iter()
        .enumerate()
        .filter(|(_, g)| inw.contains(&g.id))
        .map(|(p, g)| layering.layer_of[g.id] + tail_from[p])
        .max()
        .unwrap_or(0);
    WindowTiming { start: w.span.0, ready, tail, through }
}

impl WindowTiming {
    /// Slots a replacement must avoid so that every path through the window
    /// ends by layer `horizon`, relative to `start`. Covers layers
    /// `0..horizon - start`.
    pub fn blocked(&self, horizon: usize) -> Vec<BlockedPosition> {
        let budget = horizon.saturating_sub(self.start);
        let mut out = Vec::new();
        for (q, (&ready, &tail)) in self.ready.iter().zip(&self.tail).enumerate() {
            let deadline = horizon.saturating_sub(tail);
            for d in 0..budget {
                let abs = self.start + d;
                if abs < ready || abs >= deadline {
                    out.push(BlockedPosition { d, q });
                }
            }
        }
        out.sort();
        out
    }

    pub fn budget(&self, horizon: usize) -> usize {
        horizon.saturating_sub(self.start)
    }

    /// Layers worth encoding for `horizon`: beyond this every qubit is blocked.
    pub fn usable_layers(&self, horizon: usize) -> usize {
        let last = self.tail.iter().map(|&t| horizon.saturating_sub(t)).max().unwrap_or(horizon);
        last.saturating_sub(self.start).min(self.budget(horizon))
    }
}

/// Slots of a window's replacement that are occupied by surrounding gates
/// when the whole circuit must fit within `horizon` layers.
pub fn blocked_positions(c: &Circuit, w: &SubcircuitWindow, horizon: usize) -> Vec<BlockedPosition> {
    window_timing(c, w).blocked(horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::extract_subcircuits;

    fn fig5d() -> GF2Matrix {
        GF2Matrix::parse("100\n110\n111").unwrap()
    }

    #[test]
    fn worked_instance() {
        let p3 = ArchitectureGraph::path(3);
        let inst = encode(&fig5d(), &p3, 2, &[]);
        let SatOutcome::Sat(model) = Varisat.solve(&inst.cnf).unwrap() else { panic!("expected SAT") };
        let c = decode(&inst, &model).unwrap();
        assert!(c.same_ops(&Circuit::new(3).cx(0, 1).cx(1, 2)));
        assert_eq!(Varisat.solve(&encode(&fig5d(), &p3, 1, &[]).cnf).unwrap(), SatOutcome::Unsat);
    }

    #[test]
    fn zero_depth() {
        let p3 = ArchitectureGraph::path(3);
        assert!(Varisat.solve(&encode(&GF2Matrix::identity(3), &p3, 0, &[]).cnf).unwrap().is_sat());
        assert!(!Varisat.solve(&encode(&fig5d(), &p3, 0, &[]).cnf).unwrap().is_sat());
        let r = synthesize(&GF2Matrix::identity(3), &p3, &[], 0, &Varisat).unwrap();
        assert_eq!((r.achieved_depth, r.sat_calls, r.circuit.len()), (0, 1, 0));
    }

    #[test]
    fn downward_and_upward_walks() {
        let p3 = ArchitectureGraph::path(3);
        let r = synthesize(&fig5d(), &p3, &[], 2, &Varisat).unwrap();
        assert_eq!((r.achieved_depth, r.sat_calls), (2, 2));
        let r = synthesize(&fig5d(), &p3, &[], 5, &Varisat).unwrap();
        assert_eq!((r.achieved_depth, r.sat_calls), (2, 5));
        let r = synthesize(&fig5d(), &p3, &[], 0, &Varisat).unwrap();
        assert_eq!((r.achieved_depth, r.sat_calls), (2, 3));
        assert_eq!(r.circuit.depth(), 2);
        let b = synthesize_from_one(&fig5d(), &p3, &[], &Varisat).unwrap();
        assert_eq!((b.achieved_depth, b.sat_calls), (2, 2));
    }

    #[test]
    fn blocked_slots_are_respected() {
        let p3 = ArchitectureGraph::path(3);
        let blocked = [BlockedPosition { d: 0, q: 0 }, BlockedPosition { d: 1, q: 2 }];
        let r = synthesize(&fig5d(), &p3, &blocked, 2, &Varisat).unwrap();
        assert!(r.achieved_depth > 2);
        for (g, &d) in r.circuit.gates().iter().zip(&r.layer_of) {
            assert!(!blocked.iter().any(|b| b.d == d && g.acts_on(b.q)));
        }
        assert_eq!(bfs_oracle(&fig5d(), &p3, 20, Some(&blocked)).unwrap(), Some(r.achieved_depth));
    }

    #[test]
    fn isolated_window_has_no_blocks() {
        let c = Circuit::new(3).cx(0, 1).cx(1, 2);
        let w = &extract_subcircuits(&c, 5)[0];
        assert!(blocked_positions(&c, w, 2).is_empty());
        let t = window_timing(&c, w);
        assert_eq!(t.through, 2);
    }

    #[test]
    fn fig11_blocks() {
        let c = Circuit::new(3)
            .h(2)
            .cx(0, 1)
            .swap(1, 2)
            .cx(1, 0)
            .h(0)
            .cx(2, 1)
            .t(0)
            .h(1)
            .cx(1, 0)
            .cx(2, 1);
        assert_eq!(c.depth(), 9);
        let ws = extract_subcircuits(&c, 5);
        let w = ws.iter().find(|w| w.gate_ids.contains(&2)).unwrap();
        let t = window_timing(&c, w);
        assert_eq!(t.through, 9);
        let blocked = t.blocked(8);
        assert!(blocked.contains(&BlockedPosition { d: 0, q: 2 }));
        assert!(!blocked.contains(&BlockedPosition { d: 1, q: 2 }));
        assert!(blocked.contains(&BlockedPosition { d: 4, q: 0 }));
        assert!(!blocked.contains(&BlockedPosition { d: 3, q: 0 }));
    }
}
