//! Circuit representation and ASAP depth semantics.
//!
//! A circuit is an ordered gate list over physical qubits. Depth is always
//! measured on the SWAP-decomposed circuit, so a SWAP occupies three
//! consecutive layers on both of its qubits.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Number of CNOT layers a SWAP occupies.
pub const SWAP_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    T,
    Tdg,
    S,
    Sdg,
    /// Rotation about Z; the angle expression is kept verbatim.
    Rz(Arc<str>),
    /// Opaque single-qubit gate identified by its label.
    U(Arc<str>),
    Cnot,
    Swap,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Swap)
    }

    /// Layers occupied once SWAPs are decomposed.
    pub fn duration(&self) -> usize {
        match self {
            GateKind::Swap => SWAP_LAYERS,
            _ => 1,
        }
    }

    pub fn u(label: &str) -> Self {
        GateKind::U(Arc::from(label))
    }

    pub fn rz(angle: &str) -> Self {
        GateKind::Rz(Arc::from(angle))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub id: usize,
    pub kind: GateKind,
    qubits: [usize; 2],
}

impl Gate {
    pub fn single(id: usize, kind: GateKind, q: usize) -> Self {
        debug_assert_eq!(kind.arity(), 1);
        Gate { id, kind, qubits: [q, usize::MAX] }
    }

    /// CNOT with `control` and `target`.
    pub fn cnot(id: usize, control: usize, target: usize) -> Self {
        Gate { id, kind: GateKind::Cnot, qubits: [control, target] }
    }

    pub fn swap(id: usize, a: usize, b: usize) -> Self {
        Gate { id, kind: GateKind::Swap, qubits: [a, b] }
    }

    pub fn new(id: usize, kind: GateKind, qubits: &[usize]) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return Err(Error::InvalidGate(format!(
                "{kind:?} expects {} qubits, got {}",
                kind.arity(),
                qubits.len()
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::InvalidGate(format!("{kind:?} on repeated qubit {}", qubits[0])));
        }
        Ok(match qubits {
            [q] => Gate::single(id, kind, *q),
            [a, b] => Gate { id, kind, qubits: [*a, *b] },
            _ => unreachable!(),
        })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.qubits().contains(&q)
    }

    pub fn shares_qubit(&self, other: &Gate) -> bool {
        self.qubits().iter().any(|&q| other.acts_on(q))
    }

    pub fn with_id(&self, id: usize) -> Gate {
        Gate { id, ..self.clone() }
    }

    pub(crate) fn with_qubits(&self, qubits: &[usize]) -> Gate {
        let mut g = self.clone();
        g.qubits[..qubits.len()].copy_from_slice(qubits);
        g
    }

    /// Same operation on the same qubits, ignoring the id.
    pub fn same_op(&self, other: &Gate) -> bool {
        self.kind == other.kind && self.qubits() == other.qubits()
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.qubits();
        match &self.kind {
            GateKind::Cnot => write!(f, "CNOT({},{})", q[0], q[1]),
            GateKind::Swap => write!(f, "SWAP({},{})", q[0], q[1]),
            GateKind::Rz(a) => write!(f, "Rz[{a}]({})", q[0]),
            GateKind::U(l) => write!(f, "U[{l}]({})", q[0]),
            k => write!(f, "{k:?}({})", q[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    pub num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit { num_qubits, gates: Vec::new() }
    }

    /// Builds a circuit from gates, assigning ids by position.
    pub fn from_gates(num_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Circuit::new(num_qubits);
        for g in gates {
            c.push(g.kind.clone(), g.qubits())?;
        }
        Ok(c)
    }

    /// Keeps the ids carried by `gates`; they must be a permutation of `0..len`.
    pub(crate) fn from_raw(num_qubits: usize, gates: Vec<Gate>) -> Self {
        debug_assert!({
            let mut seen = vec![false; gates.len()];
            gates.iter().all(|g| g.id < seen.len() && !std::mem::replace(&mut seen[g.id], true))
        });
        Circuit { num_qubits, gates }
    }

    pub fn push(&mut self, kind: GateKind, qubits: &[usize]) -> Result<usize> {
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange { index: q, num_qubits: self.num_qubits });
            }
        }
        let id = self.gates.len();
        self.gates.push(Gate::new(id, kind, qubits)?);
        Ok(id)
    }

    pub fn h(mut self, q: usize) -> Self {
        self.push(GateKind::H, &[q]).expect("valid gate");
        self
    }

    pub fn x(mut self, q: usize) -> Self {
        self.push(GateKind::X, &[q]).expect("valid gate");
        self
    }

    pub fn t(mut self, q: usize) -> Self {
        self.push(GateKind::T, &[q]).expect("valid gate");
        self
    }

    pub fn cx(mut self, control: usize, target: usize) -> Self {
        self.push(GateKind::Cnot, &[control, target]).expect("valid gate");
        self
    }

    pub fn swap(mut self, a: usize, b: usize) -> Self {
        self.push(GateKind::Swap, &[a, b]).expect("valid gate");
        self
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Position of each gate id in the gate list.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![usize::MAX; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            pos[g.id] = i;
        }
        pos
    }

    pub fn gate_by_id(&self, id: usize) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id == id)
    }

    /// Reassigns ids densely by position.
    pub fn renumbered(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().enumerate().map(|(i, g)| g.with_id(i)).collect(),
        }
    }

    /// Equality of the gate sequences, ignoring ids.
    pub fn same_ops(&self, other: &Circuit) -> bool {
        self.num_qubits == other.num_qubits
            && self.gates.len() == other.gates.len()
            && self.gates.iter().zip(&other.gates).all(|(a, b)| a.same_op(b))
    }

    /// Number of CNOTs after SWAP decomposition.
    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match g.kind {
                GateKind::Cnot => 1,
                GateKind::Swap => 3,
                _ => 0,
            })
            .sum()
    }

    /// Gate count after SWAP decomposition.
    pub fn decomposed_gate_count(&self) -> usize {
        self.gates.iter().map(|g| g.kind.duration()).sum()
    }

    /// Replaces each SWAP(a,b) by CNOT(a,b) CNOT(b,a) CNOT(a,b).
    pub fn decompose_swaps(&self) -> Circuit {
        let mut gates = Vec::with_capacity(self.decomposed_gate_count());
        for g in &self.gates {
            if g.kind == GateKind::Swap {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                for (c, t) in [(a, b), (b, a), (a, b)] {
                    gates.push(Gate::cnot(gates.len(), c, t));
                }
            } else {
                gates.push(g.with_id(gates.len()));
            }
        }
        Circuit { num_qubits: self.num_qubits, gates }
    }

    pub fn depth(&self) -> usize {
        asap_depth(self.num_qubits, self.gates.iter())
    }

    pub fn layering(&self) -> Layering {
        Layering::of(self)
    }

    /// Circuit with the given gate ids removed, order preserved, ids renumbered.
    pub fn without(&self, ids: &HashSet<usize>) -> Circuit {
        Circuit::new(self.num_qubits)
            .extend_renumbered(self.gates.iter().filter(|g| !ids.contains(&g.id)).cloned())
    }

    fn extend_renumbered(mut self, gates: impl IntoIterator<Item = Gate>) -> Circuit {
        for g in gates {
            let id = self.gates.len();
            self.gates.push(g.with_id(id));
        }
        self
    }

    /// All two-qubit gates act on edges accepted by `is_edge`.
    pub fn check_compliance(&self, is_edge: impl Fn(usize, usize) -> bool) -> Result<()> {
        for g in &self.gates {
            if let [a, b] = g.qubits() {
                if !is_edge(*a, *b) {
                    return Err(Error::NonCompliant { gate: g.id, a: *a, b: *b });
                }
            }
        }
        Ok(())
    }

    /// Splices `replacement` in place of the gates in `window`.
    ///
    /// Gates that must precede the window but sit after `anchor` in the list
    /// are hoisted in front of the replacement. Returns fresh dense ids.
    pub fn replace_window(
        &self,
        window: &HashSet<usize>,
        replacement: &Circuit,
        anchor: usize,
    ) -> Result<Circuit> {
        self.replace_window_mapped(window, replacement, anchor).map(|(c, _)| c)
    }

    /// Like [`Circuit::replace_window`], also returning old-id → new-id for
    /// every gate outside the window.
    pub fn replace_window_mapped(
        &self,
        window: &HashSet<usize>,
        replacement: &Circuit,
        anchor: usize,
    ) -> Result<(Circuit, Vec<Option<usize>>)> {
        let window_qubits: HashSet<usize> = self
            .gates
            .iter()
            .filter(|g| window.contains(&g.id))
            .flat_map(|g| g.qubits().to_vec())
            .collect();
        for g in replacement.gates() {
            for &q in g.qubits() {
                if !window_qubits.contains(&q) {
                    return Err(Error::ForeignQubit(q));
                }
            }
        }
        let (ancestors, descendants) = window_closure(self, window);
        if ancestors.iter().zip(&descendants).any(|(a, d)| *a && *d) {
            return Err(Error::WindowNotContiguous);
        }
        let pos = self.positions();
        let first = window.iter().map(|&id| pos[id]).min().unwrap_or(anchor);
        let anchor = anchor.min(first);
        let mut order: Vec<&Gate> = Vec::with_capacity(self.len());
        for g in &self.gates[..anchor] {
            if !window.contains(&g.id) {
                order.push(g);
            }
        }
        for g in &self.gates[anchor..] {
            if !window.contains(&g.id) && ancestors[g.id] {
                order.push(g);
            }
        }
        let spliced = order.len();
        for g in &self.gates[anchor..] {
            if !window.contains(&g.id) && !ancestors[g.id] {
                order.push(g);
            }
        }
        let mut map = vec![None; self.len()];
        let mut gates = Vec::with_capacity(order.len() + replacement.len());
        for (i, g) in order.iter().enumerate() {
            if i == spliced {
                for r in replacement.gates() {
                    gates.push(r.with_id(gates.len()));
                }
            }
            map[g.id] = Some(gates.len());
            gates.push(g.with_id(gates.len()));
        }
        if spliced == order.len() {
            for r in replacement.gates() {
                gates.push(r.with_id(gates.len()));
            }
        }
        Ok((Circuit { num_qubits: self.num_qubits, gates }, map))
    }
}

/// For every gate id: whether it is an external ancestor / descendant of the
/// window (paths may pass through other gates).
pub(crate) fn window_closure(c: &Circuit, window: &HashSet<usize>) -> (Vec<bool>, Vec<bool>) {
    let n = c.len();
    let mut desc = vec![false; n];
    // forward: qubit is "hot" once a window gate or a descendant touched it
    let mut hot = vec![false; c.num_qubits];
    for g in c.gates() {
        let inw = window.contains(&g.id);
        let reached = g.qubits().iter().any(|&q| hot[q]);
        if !inw && reached {
            desc[g.id] = true;
        }
        if inw || reached {
            for &q in g.qubits() {
                hot[q] = true;
            }
        }
    }
    let mut anc = vec![false; n];
    let mut need = vec![false; c.num_qubits];
    for g in c.gates().iter().rev() {
        let inw = window.contains(&g.id);
        let reached = g.qubits().iter().any(|&q| need[q]);
        if !inw && reached {
            anc[g.id] = true;
        }
        if inw || reached {
            for &q in g.qubits() {
                need[q] = true;
            }
        }
    }
    (anc, desc)
}

fn asap_depth<'a>(num_qubits: usize, gates: impl Iterator<Item = &'a Gate>) -> usize {
    let mut free = vec![0usize; num_qubits];
    let mut depth = 0;
    for g in gates {
        let start = g.qubits().iter().map(|&q| free[q]).max().unwrap_or(0);
        let end = start + g.kind.duration();
        for &q in g.qubits() {
            free[q] = end;
        }
        depth = depth.max(end);
    }
    depth
}

/// ASAP schedule of a circuit. A SWAP spans three consecutive layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layering {
    /// Gate ids occupying each layer.
    pub layers: Vec<Vec<usize>>,
    /// Start layer of each gate, indexed by gate id.
    pub layer_of: Vec<usize>,
}

impl Layering {
    pub fn of(c: &Circuit) -> Layering {
        let mut free = vec![0usize; c.num_qubits];
        let mut layer_of = vec![0usize; c.len()];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for g in c.gates() {
            let start = g.qubits().iter().map(|&q| free[q]).max().unwrap_or(0);
            let end = start + g.kind.duration();
            for &q in g.qubits() {
                free[q] = end;
            }
            layer_of[g.id] = start;
            if layers.len() < end {
                layers.resize_with(end, Vec::new);
            }
            for layer in &mut layers[start..end] {
                layer.push(g.id);
            }
        }
        Layering { layers, layer_of }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Half-open layer interval occupied by gate `id`.
    pub fn interval(&self, c: &Circuit, id: usize) -> (usize, usize) {
        let start = self.layer_of[id];
        let g = c.gate_by_id(id).expect("gate id in circuit");
        (start, start + g.kind.duration())
    }
}
