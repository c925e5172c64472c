//! SWAP/CNOT commutation rules and the genetic search over commutation
//! sequences.
//!
//! Gate ids survive a commutation (only operands may be relabeled), so a
//! genome of id pairs can be replayed from its base circuit.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::arch::ArchitectureGraph;
use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::sweep::count_sub;

/// Two gate ids; the earlier one in the circuit is moved past the later one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CommutationPair {
    pub first: usize,
    pub second: usize,
}

impl CommutationPair {
    pub fn new(first: usize, second: usize) -> Self {
        CommutationPair { first, second }
    }

    /// Same pair regardless of orientation.
    pub fn same_gates(&self, other: &CommutationPair) -> bool {
        (self.first, self.second) == (other.first, other.second)
            || (self.first, self.second) == (other.second, other.first)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("gate {0} does not exist")]
    Missing(usize),
    #[error("gates are not adjacent")]
    NotAdjacent,
    #[error("no commutation rule applies")]
    NoRule,
    #[error("rewritten CNOT({0},{1}) is not on an architecture edge")]
    Connectivity(usize, usize),
}

impl From<Rejection> for Error {
    fn from(r: Rejection) -> Self {
        Error::Rejected(r.to_string())
    }
}

fn swap_image(a: usize, b: usize, q: usize) -> usize {
    if q == a {
        b
    } else if q == b {
        a
    } else {
        q
    }
}

fn relabel(g: &Gate, a: usize, b: usize) -> Gate {
    let qs: Vec<usize> = g.qubits().iter().map(|&q| swap_image(a, b, q)).collect();
    g.with_qubits(&qs)
}

/// The rewritten pair `(second', first')` when the rules allow exchanging
/// `a` (earlier) and `b` (later).
fn rewrite(a: &Gate, b: &Gate) -> Option<(Gate, Gate)> {
    use GateKind::{Cnot, Swap};
    match (&a.kind, &b.kind) {
        (Cnot, Cnot) => {
            let (x, y) = (a.qubits(), b.qubits());
            let shared_control = x[0] == y[0] && x[1] != y[1];
            let shared_target = x[1] == y[1] && x[0] != y[0];
            let crossed = x[0] == y[1] || x[1] == y[0];
            ((shared_control || shared_target) && !crossed).then(|| (b.clone(), a.clone()))
        }
        (Swap, Swap) => None,
        (Swap, _) => {
            let (s, t) = (a.qubits()[0], a.qubits()[1]);
            Some((relabel(b, s, t), a.clone()))
        }
        (_, Swap) => {
            let (s, t) = (b.qubits()[0], b.qubits()[1]);
            Some((b.clone(), relabel(a, s, t)))
        }
        _ => None,
    }
}

struct Plan {
    p1: usize,
    p2: usize,
    new_second: Gate,
    new_first: Gate,
    /// Gates strictly between the pair that must stay before the moved second gate.
    before: Vec<bool>,
}

fn plan(c: &Circuit, ag: &ArchitectureGraph, p1: usize, p2: usize) -> std::result::Result<Plan, Rejection> {
    let gates = c.gates();
    let (a, b) = (&gates[p1], &gates[p2]);
    if !a.shares_qubit(b) {
        return Err(Rejection::NotAdjacent);
    }
    let range = &gates[p1 + 1..p2];
    let mut hot = vec![false; c.num_qubits];
    for &q in a.qubits() {
        hot[q] = true;
    }
    let mut desc = vec![false; range.len()];
    for (i, g) in range.iter().enumerate() {
        if g.qubits().iter().any(|&q| hot[q]) {
            desc[i] = true;
            for &q in g.qubits() {
                hot[q] = true;
            }
        }
    }
    let mut need = vec![false; c.num_qubits];
    for &q in b.qubits() {
        need[q] = true;
    }
    let mut before = vec![false; range.len()];
    for (i, g) in range.iter().enumerate().rev() {
        if g.qubits().iter().any(|&q| need[q]) {
            if desc[i] {
                return Err(Rejection::NotAdjacent);
            }
            before[i] = true;
            for &q in g.qubits() {
                need[q] = true;
            }
        }
    }
    let (new_second, new_first) = rewrite(a, b).ok_or(Rejection::NoRule)?;
    for g in [&new_second, &new_first] {
        if let (GateKind::Cnot, [x, y]) = (&g.kind, g.qubits()) {
            if !ag.is_edge(*x, *y) {
                return Err(Rejection::Connectivity(*x, *y));
            }
        }
    }
    Ok(Plan { p1, p2, new_second, new_first, before })
}

fn apply_plan(c: &Circuit, p: Plan) -> Circuit {
    let gates = c.gates();
    let mut out = Vec::with_capacity(gates.len());
    out.extend_from_slice(&gates[..p.p1]);
    let range = &gates[p.p1 + 1..p.p2];
    out.extend(range.iter().zip(&p.before).filter(|(_, &b)| b).map(|(g, _)| g.clone()));
    out.push(p.new_second);
    out.push(p.new_first);
    out.extend(range.iter().zip(&p.before).filter(|(_, &b)| !b).map(|(g, _)| g.clone()));
    out.extend_from_slice(&gates[p.p2 + 1..]);
    Circuit::from_raw(c.num_qubits, out)
}

fn ordered(c: &Circuit, pair: CommutationPair) -> std::result::Result<(usize, usize), Rejection> {
    let pos = c.positions();
    let at = |id: usize| pos.get(id).copied().filter(|&p| p != usize::MAX).ok_or(Rejection::Missing(id));
    let (x, y) = (at(pair.first)?, at(pair.second)?);
    match x.cmp(&y) {
        Ordering::Less => Ok((x, y)),
        Ordering::Greater => Ok((y, x)),
        Ordering::Equal => Err(Rejection::NotAdjacent),
    }
}

/// Exchanges the two gates of `pair` by one of the generalized rules:
/// CNOTs sharing only a control or only a target swap order; a single-qubit
/// gate or CNOT crossing a SWAP has its operands relabeled through the SWAP.
/// Every rewritten CNOT must lie on an edge of `ag`.
pub fn try_commute(
    c: &Circuit,
    ag: &ArchitectureGraph,
    pair: CommutationPair,
) -> std::result::Result<Circuit, Rejection> {
    let (p1, p2) = ordered(c, pair)?;
    Ok(apply_plan(c, plan(c, ag, p1, p2)?))
}

/// All pairs `try_commute` would accept, ordered by the first gate's position.
pub fn applicable_pairs(c: &Circuit, ag: &ArchitectureGraph) -> Vec<CommutationPair> {
    let gates = c.gates();
    let mut next_on = vec![usize::MAX; c.num_qubits];
    let mut next: Vec<[usize; 2]> = vec![[usize::MAX; 2]; gates.len()];
    for (i, g) in gates.iter().enumerate().rev() {
        for (k, &q) in g.qubits().iter().enumerate() {
            next[i][k] = next_on[q];
            next_on[q] = i;
        }
    }
    let mut out = Vec::new();
    for (i, g) in gates.iter().enumerate() {
        let mut cands: Vec<usize> = next[i][..g.qubits().len()].iter().copied().filter(|&j| j != usize::MAX).collect();
        cands.sort_unstable();
        cands.dedup();
        for j in cands {
            if plan(c, ag, i, j).is_ok() {
                out.push(CommutationPair::new(g.id, gates[j].id));
            }
        }
    }
    out
}

/// A candidate solution: commutations replayed in order from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationGenome {
    pub pairs: Vec<CommutationPair>,
    base: Arc<Circuit>,
}

impl CommutationGenome {
    pub fn new(base: Arc<Circuit>) -> Self {
        CommutationGenome { pairs: Vec::new(), base }
    }

    pub fn with_pairs(base: Arc<Circuit>, pairs: Vec<CommutationPair>) -> Self {
        CommutationGenome { pairs, base }
    }

    pub fn base(&self) -> &Circuit {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn replay(&self, ag: &ArchitectureGraph) -> std::result::Result<Circuit, Rejection> {
        let mut c = (*self.base).clone();
        for &p in &self.pairs {
            c = try_commute(&c, ag, p)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessBreakdown {
    pub r_dpt: f64,
    pub r_sub: f64,
    pub fit: f64,
}

struct BaseStats {
    depth: usize,
    subs: usize,
    alpha: f64,
    n_q: usize,
}

impl BaseStats {
    fn of(base: &Circuit, alpha: f64, n_q: usize) -> Result<Self> {
        let depth = base.depth();
        if depth == 0 {
            return Err(Error::Empty("base circuit has zero depth"));
        }
        Ok(BaseStats { depth, subs: count_sub(base, n_q), alpha, n_q })
    }

    fn score(&self, candidate: &Circuit) -> FitnessBreakdown {
        let r_dpt = (self.depth as f64 - candidate.depth() as f64) / self.depth as f64;
        let r_sub = (self.subs as f64 - count_sub(candidate, self.n_q) as f64) / self.subs.max(1) as f64;
        FitnessBreakdown { r_dpt, r_sub, fit: self.alpha * r_dpt + (1.0 - self.alpha) * r_sub }
    }
}

/// Weighted relative reductions of depth and of the window count.
pub fn fitness(base: &Circuit, candidate: &Circuit, alpha: f64, n_q: usize) -> Result<FitnessBreakdown> {
    Ok(BaseStats::of(base, alpha, n_q)?.score(candidate))
}

fn extend_randomly(
    mut genome: CommutationGenome,
    mut c: Circuit,
    ag: &ArchitectureGraph,
    k: usize,
    rng: &mut impl Rng,
) -> (CommutationGenome, Circuit) {
    for _ in 0..k {
        let pairs = applicable_pairs(&c, ag);
        let Some(&p) = pairs.choose(rng) else { break };
        c = try_commute(&c, ag, p).expect("applicable pair commutes");
        genome.pairs.push(p);
    }
    (genome, c)
}

fn cross_from(
    mut genome: CommutationGenome,
    mut c: Circuit,
    donor: &CommutationGenome,
    ag: &ArchitectureGraph,
) -> (CommutationGenome, Circuit) {
    for &p in &donor.pairs {
        if genome.pairs.iter().any(|q| q.same_gates(&p)) {
            continue;
        }
        if let Ok(next) = try_commute(&c, ag, p) {
            c = next;
            genome.pairs.push(p);
        }
    }
    (genome, c)
}

/// Extends `base_genome` with the donor's pairs that are new and still apply.
pub fn crossover(
    base_genome: &CommutationGenome,
    donor: &CommutationGenome,
    ag: &ArchitectureGraph,
) -> std::result::Result<CommutationGenome, Rejection> {
    let c = base_genome.replay(ag)?;
    Ok(cross_from(base_genome.clone(), c, donor, ag).0)
}

/// Appends one to three random applicable commutations.
pub fn mutate(
    genome: &CommutationGenome,
    ag: &ArchitectureGraph,
    rng: &mut impl Rng,
) -> std::result::Result<CommutationGenome, Rejection> {
    let c = genome.replay(ag)?;
    let k = rng.gen_range(1..=3);
    Ok(extend_randomly(genome.clone(), c, ag, k, rng).0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaParams {
    pub n_species: usize,
    /// Weight of the depth reduction in the fitness.
    pub alpha: f64,
    /// Fraction of the population mutated each generation.
    pub alpha_mu: f64,
    pub t_max: usize,
    pub t_idle: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams { n_species: 10, alpha: 0.9, alpha_mu: 0.4, t_max: 50, t_idle: 15, seed: 0 }
    }
}

#[derive(Debug, Clone)]
struct Individual {
    genome: CommutationGenome,
    circuit: Circuit,
    fit: FitnessBreakdown,
    order: usize,
}

fn rank(a: &Individual, b: &Individual) -> Ordering {
    b.fit
        .fit
        .total_cmp(&a.fit.fit)
        .then(a.genome.len().cmp(&b.genome.len()))
        .then(a.order.cmp(&b.order))
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub circuit: Circuit,
    pub genome: CommutationGenome,
    pub fitness: FitnessBreakdown,
    /// Best fitness of the population after initialization and after each generation.
    pub history: Vec<f64>,
}

enum Job {
    Init,
    Mutate(usize),
    Cross(usize, usize),
}

/// Genetic search over commutation sequences.
pub fn ga_optimize(c0: &Circuit, ag: &ArchitectureGraph, params: &GaParams, n_q: usize) -> Result<GaOutcome> {
    let base = Arc::new(c0.clone());
    let stats = match BaseStats::of(c0, params.alpha, n_q) {
        Ok(s) => s,
        Err(_) => {
            let zero = FitnessBreakdown { r_dpt: 0.0, r_sub: 0.0, fit: 0.0 };
            return Ok(GaOutcome { circuit: c0.clone(), genome: CommutationGenome::new(base), fitness: zero, history: vec![0.0] });
        }
    };
    let n = params.n_species.max(1);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counter = 0usize;

    let run = |jobs: Vec<(Job, u64)>, pop: &[Individual], counter: &mut usize| -> Vec<Individual> {
        let made: Vec<(CommutationGenome, Circuit)> = jobs
            .par_iter()
            .map(|(job, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                match job {
                    Job::Init => {
                        let k = rng.gen_range(1..=8);
                        extend_randomly(CommutationGenome::new(base.clone()), c0.clone(), ag, k, &mut rng)
                    }
                    Job::Mutate(i) => {
                        let k = rng.gen_range(1..=3);
                        extend_randomly(pop[*i].genome.clone(), pop[*i].circuit.clone(), ag, k, &mut rng)
                    }
                    Job::Cross(i, j) => cross_from(pop[*i].genome.clone(), pop[*i].circuit.clone(), &pop[*j].genome, ag),
                }
            })
            .collect();
        let fits: Vec<FitnessBreakdown> = made.par_iter().map(|(_, c)| stats.score(c)).collect();
        made.into_iter()
            .zip(fits)
            .map(|((genome, circuit), fit)| {
                *counter += 1;
                Individual { genome, circuit, fit, order: *counter - 1 }
            })
            .collect()
    };

    let init: Vec<(Job, u64)> = (0..3 * n).map(|_| (Job::Init, master.gen())).collect();
    let mut pop = run(init, &[], &mut counter);
    pop.sort_by(rank);
    pop.truncate(n);
    let mut best = pop[0].clone();
    let mut history = vec![best.fit.fit];
    let mut idle = 0;
    let n_mut = ((params.alpha_mu * n as f64).floor() as usize).min(n);
    for _ in 0..params.t_max {
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        idx.shuffle(&mut master);
        let mut jobs = Vec::with_capacity(pop.len());
        for (r, &i) in idx.iter().enumerate() {
            let job = if r < n_mut {
                Job::Mutate(i)
            } else {
                let mut j = master.gen_range(0..pop.len());
                if pop.len() > 1 {
                    while j == i {
                        j = master.gen_range(0..pop.len());
                    }
                }
                Job::Cross(i, j)
            };
            jobs.push((job, master.gen()));
        }
        let offspring = run(jobs, &pop, &mut counter);
        pop.extend(offspring);
        pop.sort_by(rank);
        pop.truncate(n);
        if pop[0].fit.fit > best.fit.fit {
            best = pop[0].clone();
            idle = 0;
        } else {
            idle += 1;
        }
        history.push(pop[0].fit.fit);
        if idle >= params.t_idle {
            break;
        }
    }
    Ok(GaOutcome { circuit: best.circuit, genome: best.genome, fitness: best.fit, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::equivalent;

    fn fig6a() -> Circuit {
        Circuit::new(3).h(2).cx(1, 0).cx(0, 1).swap(1, 2).x(1).cx(1, 2)
    }

    fn fig8() -> Circuit {
        Circuit::new(4).h(2).cx(1, 0).cx(0, 1).cx(1, 2).swap(1, 2).x(2).swap(2, 3).cx(2, 3).cx(1, 2)
    }

    fn pairs(v: &[(usize, usize)]) -> Vec<CommutationPair> {
        v.iter().map(|&(a, b)| CommutationPair::new(a, b)).collect()
    }

    #[test]
    fn good_commutation_of_fig6() {
        let ag = ArchitectureGraph::path(3);
        let c = fig6a();
        let out = try_commute(&c, &ag, CommutationPair::new(3, 4)).unwrap();
        let expect = Circuit::new(3).h(2).cx(1, 0).cx(0, 1).x(2).swap(1, 2).cx(1, 2);
        assert!(out.same_ops(&expect) || out.depth() == 6);
        assert_eq!(out.depth(), 6);
        assert!(equivalent(&c, &out, 1e-9).unwrap());
        let f = fitness(&c, &out, 0.9, 5).unwrap();
        assert!((f.r_dpt - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn bad_commutation_of_fig6() {
        let ag = ArchitectureGraph::path(3);
        let c = fig6a();
        // moving H(2) across the SWAP lands it on q1 and deepens the circuit
        let out = try_commute(&c, &ag, CommutationPair::new(0, 3)).unwrap();
        assert_eq!(out.depth(), 8);
        let f = fitness(&c, &out, 0.9, 5).unwrap();
        assert!((f.r_dpt + 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn connectivity_rejection() {
        let ag = ArchitectureGraph::path(3);
        let c = Circuit::new(3).cx(1, 0).swap(1, 2);
        assert_eq!(try_commute(&c, &ag, CommutationPair::new(0, 1)), Err(Rejection::Connectivity(2, 0)));
        let tri = ArchitectureGraph::complete(3);
        assert!(try_commute(&c, &tri, CommutationPair::new(0, 1)).is_ok());
    }

    #[test]
    fn rules_are_involutions() {
        let ag = ArchitectureGraph::complete(4);
        let c = Circuit::new(4).cx(0, 1).cx(0, 2).swap(2, 3).t(3).cx(3, 1);
        for p in applicable_pairs(&c, &ag) {
            let once = try_commute(&c, &ag, p).unwrap();
            let twice = try_commute(&once, &ag, p).unwrap();
            assert!(equivalent(&c, &once, 1e-9).unwrap());
            let mut a: Vec<String> = c.gates().iter().map(|g| format!("{}:{g}", g.id)).collect();
            let mut b: Vec<String> = twice.gates().iter().map(|g| format!("{}:{g}", g.id)).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "pair {p:?}");
        }
    }

    #[test]
    fn non_adjacent_and_no_rule() {
        let ag = ArchitectureGraph::path(3);
        let c = Circuit::new(3).cx(0, 1).h(1).cx(0, 1).cx(1, 2);
        assert_eq!(try_commute(&c, &ag, CommutationPair::new(0, 2)), Err(Rejection::NotAdjacent));
        assert_eq!(try_commute(&c, &ag, CommutationPair::new(2, 3)), Err(Rejection::NoRule));
        assert_eq!(try_commute(&c, &ag, CommutationPair::new(0, 9)), Err(Rejection::Missing(9)));
    }

    #[test]
    fn fig8_crossover() {
        let ag = ArchitectureGraph::path(4);
        let base = Arc::new(fig8());
        let s1 = CommutationGenome::with_pairs(base.clone(), pairs(&[(3, 4), (4, 0)]));
        let s2 = CommutationGenome::with_pairs(base.clone(), pairs(&[(3, 4), (5, 6)]));
        let s3 = CommutationGenome::with_pairs(base.clone(), pairs(&[(6, 7)]));
        for s in [&s1, &s2, &s3] {
            assert!(s.replay(&ag).is_ok());
        }
        let child = crossover(&s2, &s1, &ag).unwrap();
        assert_eq!(child.pairs, pairs(&[(3, 4), (5, 6), (4, 0)]));
        assert_eq!(crossover(&s2, &s3, &ag).unwrap(), s2);
        assert_eq!(crossover(&s2, &s2, &ag).unwrap(), s2);
        // mutation of Fig. 8(e)
        let mutated = CommutationGenome::with_pairs(base, pairs(&[(3, 4), (5, 6), (5, 6), (6, 7)]));
        assert!(mutated.replay(&ag).is_ok());
    }

    #[test]
    fn mutation_keeps_genome_replayable() {
        let ag = ArchitectureGraph::path(4);
        let mut g = CommutationGenome::new(Arc::new(fig8()));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            g = mutate(&g, &ag, &mut rng).unwrap();
            let c = g.replay(&ag).unwrap();
            c.check_compliance(|a, b| ag.is_edge(a, b)).unwrap();
        }
        assert!(!g.is_empty());
        let lonely = CommutationGenome::new(Arc::new(Circuit::new(2).h(0).h(1)));
        assert!(mutate(&lonely, &ag, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn ga_is_deterministic_and_elitist() {
        let ag = ArchitectureGraph::path(3);
        let params = GaParams { seed: 7, ..GaParams::default() };
        let a = ga_optimize(&fig6a(), &ag, &params, 5).unwrap();
        let b = ga_optimize(&fig6a(), &ag, &params, 5).unwrap();
        assert_eq!(a.circuit, b.circuit);
        assert_eq!(a.history, b.history);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(a.circuit.depth() <= 6);
        assert!(equivalent(&fig6a(), &a.circuit, 1e-9).unwrap());
        let zero = GaParams { t_max: 0, ..params };
        assert_eq!(ga_optimize(&fig6a(), &ag, &zero, 5).unwrap().history.len(), 1);
    }
}
