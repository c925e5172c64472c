//! CNF encoding of "the target matrix is reachable with at most D CNOT layers".

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::arch::ArchitectureGraph;
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gf2::GF2Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CnfVariable {
    /// Entry (i,k) of the matrix after `d` layers.
    Matrix { i: usize, k: usize, d: usize },
    /// CNOT from `c` to `t` in layer `d`; only allocated on graph edges.
    Gate { c: usize, t: usize, d: usize },
    /// The target is already reached before layer `d`, which stays empty.
    Reached { d: usize },
}

/// A (relative layer, local qubit) slot where no CNOT may be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockedPosition {
    pub d: usize,
    pub q: usize,
}

/// Plain clause set with DIMACS literals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    pub var_count: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.var_count, self.clauses.len());
        for cl in &self.clauses {
            for lit in cl {
                write!(s, "{lit} ").expect("writing to a String");
            }
            s.push_str("0\n");
        }
        s
    }

    pub fn parse_dimacs(text: &str) -> Result<Cnf> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut cur = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let bad = |msg: String| Error::Parse { line: i + 1, col: 1, msg };
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let f: Vec<&str> = line.split_whitespace().collect();
                match f.as_slice() {
                    ["p", "cnf", v, c] => {
                        let v = v.parse().map_err(|_| bad(format!("bad variable count `{v}`")))?;
                        let c = c.parse().map_err(|_| bad(format!("bad clause count `{c}`")))?;
                        header = Some((v, c));
                    }
                    _ => return Err(bad("malformed header".into())),
                }
                continue;
            }
            let (vars, _) = header.ok_or_else(|| bad("clause before header".into()))?;
            for tok in line.split_whitespace() {
                let lit: i32 = tok.parse().map_err(|_| bad(format!("bad literal `{tok}`")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut cur));
                } else if lit.unsigned_abs() as usize > vars {
                    return Err(bad(format!("literal {lit} exceeds {vars} variables")));
                } else {
                    cur.push(lit);
                }
            }
        }
        let (var_count, _) = header.ok_or(Error::Parse { line: 1, col: 1, msg: "missing header".into() })?;
        if !cur.is_empty() {
            clauses.push(cur);
        }
        Ok(Cnf { var_count, clauses })
    }
}

#[derive(Debug, Clone)]
pub struct CnfInstance {
    pub cnf: Cnf,
    /// `vars[v - 1]` is the meaning of DIMACS variable `v`.
    pub vars: Vec<CnfVariable>,
    index: HashMap<CnfVariable, i32>,
    pub n: usize,
    pub depth: usize,
    edges: Vec<(usize, usize)>,
}

impl CnfInstance {
    pub fn var(&self, v: CnfVariable) -> Option<i32> {
        self.index.get(&v).copied()
    }

    pub fn to_dimacs(&self) -> String {
        self.cnf.to_dimacs()
    }

    fn alloc(&mut self, v: CnfVariable) -> i32 {
        self.vars.push(v);
        let id = self.vars.len() as i32;
        self.index.insert(v, id);
        id
    }

    fn add(&mut self, clause: Vec<i32>) {
        debug_assert!(!clause.is_empty());
        self.cnf.clauses.push(clause);
    }
}

/// Encodes reachability of `target` from the identity in at most `depth`
/// layers of CNOTs on edges of `ag`, with no gate touching a blocked slot.
///
/// Without blocked slots every layer holds a gate until the target is
/// reached; with them, idle layers are allowed. Either way satisfiability is
/// monotone in `depth`. Gates are kept at their earliest layer.
pub fn encode(target: &GF2Matrix, ag: &ArchitectureGraph, depth: usize, blocked: &[BlockedPosition]) -> CnfInstance {
    let n = target.n();
    debug_assert_eq!(ag.num_qubits(), n);
    let edges = ag.directed_edges();
    let mut inst = CnfInstance {
        cnf: Cnf::default(),
        vars: Vec::new(),
        index: HashMap::new(),
        n,
        depth,
        edges: edges.clone(),
    };
    let mut m = vec![vec![vec![0i32; n]; n]; depth + 1];
    for (d, layer) in m.iter_mut().enumerate() {
        for (i, row) in layer.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = inst.alloc(CnfVariable::Matrix { i, k, d });
            }
        }
    }
    let mut g: Vec<Vec<i32>> = Vec::with_capacity(depth);
    let mut r = Vec::with_capacity(depth);
    for d in 0..depth {
        g.push(edges.iter().map(|&(c, t)| inst.alloc(CnfVariable::Gate { c, t, d })).collect());
        r.push(inst.alloc(CnfVariable::Reached { d }));
    }
    inst.cnf.var_count = inst.vars.len();

    let lit = |v: i32, val: bool| if val { v } else { -v };
    for i in 0..n {
        for k in 0..n {
            inst.add(vec![lit(m[0][i][k], i == k)]);
            inst.add(vec![lit(m[depth][i][k], target.get(i, k))]);
        }
    }
    for d in 0..depth {
        // at least one gate, or the target is already in place; with blocked
        // slots the surrounding circuit may need idle layers anywhere
        if blocked.is_empty() {
            let mut some: Vec<i32> = g[d].clone();
            some.push(r[d]);
            inst.add(some);
        }
        for i in 0..n {
            for k in 0..n {
                inst.add(vec![-r[d], lit(m[d][i][k], target.get(i, k))]);
            }
        }
        for &gv in &g[d] {
            inst.add(vec![-r[d], -gv]);
        }
        // at most one gate per qubit
        for q in 0..n {
            let touching: Vec<i32> = edges
                .iter()
                .zip(&g[d])
                .filter(|((c, t), _)| *c == q || *t == q)
                .map(|(_, &v)| v)
                .collect();
            for a in 0..touching.len() {
                for b in a + 1..touching.len() {
                    inst.add(vec![-touching[a], -touching[b]]);
                }
            }
        }
        // a gate c->t XORs row c into row t
        for (e, &(c, t)) in edges.iter().enumerate() {
            let gv = g[d][e];
            for j in 0..n {
                let (x, a, b) = (m[d + 1][t][j], m[d][t][j], m[d][c][j]);
                inst.add(vec![-gv, -x, a, b]);
                inst.add(vec![-gv, -x, -a, -b]);
                inst.add(vec![-gv, x, -a, b]);
                inst.add(vec![-gv, x, a, -b]);
            }
        }
        // a row changes only when some gate targets it
        for k in 0..n {
            let causes: Vec<i32> = edges.iter().zip(&g[d]).filter(|((_, t), _)| *t == k).map(|(_, &v)| v).collect();
            for j in 0..n {
                let (x, a) = (m[d + 1][k][j], m[d][k][j]);
                let mut c1 = causes.clone();
                c1.extend([-x, a]);
                inst.add(c1);
                let mut c2 = causes.clone();
                c2.extend([x, -a]);
                inst.add(c2);
            }
        }
    }
    // Symmetry breaking: a gate whose qubits are idle and free one layer
    // earlier could move there, so only earliest placements are kept.
    let is_blocked = |d: usize, q: usize| blocked.iter().any(|b| b.d == d && b.q == q);
    for d in 1..depth {
        for (e, &(c, t)) in edges.iter().enumerate() {
            if is_blocked(d - 1, c) || is_blocked(d - 1, t) {
                continue;
            }
            let mut cl: Vec<i32> = edges
                .iter()
                .zip(&g[d - 1])
                .filter(|((a, b), _)| [*a, *b].iter().any(|q| *q == c || *q == t))
                .map(|(_, &v)| v)
                .collect();
            cl.push(-g[d][e]);
            inst.add(cl);
        }
    }
    for b in blocked {
        if b.d >= depth {
            continue;
        }
        for (e, &(c, t)) in edges.iter().enumerate() {
            if c == b.q || t == b.q {
                inst.add(vec![-g[b.d][e]]);
            }
        }
    }
    inst
}

/// Gates of a satisfying model grouped by layer, each layer ordered by (c,t).
pub fn decode_layers(inst: &CnfInstance, model: &[bool]) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut layers = Vec::with_capacity(inst.depth);
    for d in 0..inst.depth {
        let mut used = vec![false; inst.n];
        let mut layer = Vec::new();
        for &(c, t) in &inst.edges {
            let v = inst.var(CnfVariable::Gate { c, t, d }).expect("gate variable");
            if model.get(v as usize - 1).copied().unwrap_or(false) {
                if used[c] || used[t] {
                    return Err(Error::Invariant(format!("overlapping gates in layer {d}")));
                }
                used[c] = true;
                used[t] = true;
                layer.push((c, t));
            }
        }
        layers.push(layer);
    }
    Ok(layers)
}

/// CNOT circuit of a satisfying model, in layer order.
pub fn decode(inst: &CnfInstance, model: &[bool]) -> Result<Circuit> {
    let mut c = Circuit::new(inst.n);
    for layer in decode_layers(inst, model)? {
        for (a, b) in layer {
            c.push(crate::circuit::GateKind::Cnot, &[a, b])?;
        }
    }
    Ok(c)
}
