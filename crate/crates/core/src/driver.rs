//! The outer optimization loop, benchmark harness and test-input plumbing.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::ArchitectureGraph;
use crate::circuit::{Circuit, GateKind};
use crate::commute::{ga_optimize, GaParams};
use crate::error::{Error, Result};
use crate::predictor::{DepthPredictor, MlpPredictor, OraclePredictor, FRAME};
use crate::qasm::parse_qasm;
use crate::sweep::{extract_subcircuits, score_window, select_top, SubcircuitWindow, SweepParams};
use crate::synth::{satisfiable, synthesize, synthesize_capped, window_timing, Cadical, SatBackend};
use crate::verify::{equivalent, linear_equivalent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorMode {
    Mlp,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsrParams {
    pub ga: GaParams,
    pub sweep: SweepParams,
    pub predictor_mode: PredictorMode,
    /// Constrain replacements by the surrounding gates.
    pub blocking: bool,
    pub max_outer_iters: usize,
    pub seed: u64,
    pub safety_verify: bool,
}

impl Default for SsrParams {
    fn default() -> Self {
        SsrParams {
            ga: GaParams::default(),
            sweep: SweepParams::default(),
            predictor_mode: PredictorMode::Oracle,
            blocking: true,
            max_outer_iters: 20,
            seed: 0,
            safety_verify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub original_depth: usize,
    pub final_depth: usize,
    /// Gate counts with every SWAP counted as three CNOTs.
    pub original_gate_count: usize,
    pub final_gate_count: usize,
    pub depth_improvement_fraction: f64,
    pub gate_improvement_fraction: f64,
    pub sat_calls: usize,
    pub runtime_seconds: f64,
    pub outer_iterations: usize,
    pub rewrites_accepted: usize,
}

/// `(ori - opt) / ori`, zero when `ori` is zero.
pub fn improvement(ori: usize, opt: usize) -> f64 {
    if ori == 0 {
        0.0
    } else {
        (ori as f64 - opt as f64) / ori as f64
    }
}

impl OptimizationReport {
    fn new(c0: &Circuit) -> Self {
        OptimizationReport {
            original_depth: c0.depth(),
            final_depth: c0.depth(),
            original_gate_count: c0.decomposed_gate_count(),
            final_gate_count: c0.decomposed_gate_count(),
            depth_improvement_fraction: 0.0,
            gate_improvement_fraction: 0.0,
            sat_calls: 0,
            runtime_seconds: 0.0,
            outer_iterations: 0,
            rewrites_accepted: 0,
        }
    }

    fn finish(&mut self, c: &Circuit, started: Instant) {
        self.final_depth = c.depth();
        self.final_gate_count = c.decomposed_gate_count();
        self.depth_improvement_fraction = improvement(self.original_depth, self.final_depth);
        self.gate_improvement_fraction = improvement(self.original_gate_count, self.final_gate_count);
        self.runtime_seconds = started.elapsed().as_secs_f64();
    }

    /// The report with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_runtime(&self) -> OptimizationReport {
        OptimizationReport { runtime_seconds: 0.0, ..self.clone() }
    }
}

/// A window replaced by a synthesized equivalent.
#[derive(Debug, Clone)]
pub struct Splice {
    pub circuit: Circuit,
    /// Old gate id to new gate id, `None` for the window's own gates.
    pub id_map: Vec<Option<usize>>,
    /// The replacement on the window's local qubits.
    pub local: Circuit,
}

#[derive(Debug, Clone)]
pub struct WindowRewrite {
    /// `None` when no replacement fits.
    pub splice: Option<Splice>,
    pub sat_calls: usize,
}

/// Replaces `w` by a depth-optimal equivalent. With `blocking`, the search
/// shrinks a whole-circuit horizon while the constrained instance stays
/// satisfiable; otherwise the window alone is minimized.
pub fn rewrite_window(
    c: &Circuit,
    ag: &ArchitectureGraph,
    w: &SubcircuitWindow,
    d_pred: usize,
    blocking: bool,
    backend: &dyn SatBackend,
) -> Result<WindowRewrite> {
    let target = w.matrix(c)?;
    let local_ag = w.local_ag(ag);
    let mut sat_calls = 0;
    let best = if blocking {
        // feasibility is monotone in the horizon and one query at the
        // usable layer count decides it; the original window fits `through`
        let timing = window_timing(c, w);
        let feasible = |horizon: usize, calls: &mut usize| -> Result<bool> {
            *calls += 1;
            satisfiable(&target, &local_ag, &timing.blocked(horizon), timing.usable_layers(horizon), backend)
        };
        let (mut lo, mut hi) = (timing.start, timing.through);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if feasible(mid, &mut sat_calls)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        match synthesize_capped(&target, &local_ag, &timing.blocked(hi), d_pred, timing.usable_layers(hi), backend) {
            Ok(r) => {
                sat_calls += r.sat_calls;
                Some(r)
            }
            Err(Error::DepthCapExceeded(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        let r = synthesize(&target, &local_ag, &[], d_pred, backend)?;
        sat_calls += r.sat_calls;
        Some(r)
    };
    let splice = match best {
        None => None,
        Some(best) => match w.to_physical(&best.circuit, c.num_qubits).and_then(|r| c.replace_window_mapped(&w.id_set(), &r, w.anchor)) {
            Ok((circuit, id_map)) => Some(Splice { circuit, id_map, local: best.circuit }),
            Err(Error::WindowNotContiguous) => None,
            Err(e) => return Err(e),
        },
    };
    Ok(WindowRewrite { splice, sat_calls })
}

fn check_rewrite(before: &Circuit, after: &Circuit, w: &SubcircuitWindow, local: &Circuit) -> Result<()> {
    if !linear_equivalent(&w.local_circuit(before), local, w.qubits.len())? {
        return Err(Error::Invariant("replacement differs from its window".into()));
    }
    if before.num_qubits <= 10 && !equivalent(before, after, 1e-9)? {
        return Err(Error::Invariant("rewrite changed the circuit unitary".into()));
    }
    Ok(())
}

fn better(new: &Circuit, old: &Circuit) -> bool {
    let (dn, dold) = (new.depth(), old.depth());
    dn < dold || (dn == dold && new.decomposed_gate_count() < old.decomposed_gate_count())
}

fn iteration_seed(seed: u64, iter: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter as u64 + 1);
    rng.gen()
}

/// Predictor selected by `mode`; the network mode without models falls back
/// to the oracle per window.
pub fn predictor_for(mode: PredictorMode) -> Box<dyn DepthPredictor> {
    match mode {
        PredictorMode::Oracle => Box::new(OraclePredictor),
        PredictorMode::Mlp => Box::new(MlpPredictor::default()),
    }
}

pub fn ssr_optimize(c0: &Circuit, ag: &ArchitectureGraph, params: &SsrParams) -> Result<(Circuit, OptimizationReport)> {
    let predictor = predictor_for(params.predictor_mode);
    ssr_optimize_with(c0, ag, params, predictor.as_ref(), &Cadical)
}

/// The outer loop: commutation search, sweeping, scoring and resynthesis of
/// the best windows, repeated until an iteration gains no depth.
pub fn ssr_optimize_with(
    c0: &Circuit,
    ag: &ArchitectureGraph,
    params: &SsrParams,
    predictor: &dyn DepthPredictor,
    backend: &dyn SatBackend,
) -> Result<(Circuit, OptimizationReport)> {
    let started = Instant::now();
    if c0.num_qubits > ag.num_qubits() {
        return Err(Error::Dimension(format!("{}-qubit circuit on a {}-node graph", c0.num_qubits, ag.num_qubits())));
    }
    c0.check_compliance(|a, b| ag.is_edge(a, b))?;
    let n_q = params.sweep.n_q;
    if n_q > FRAME {
        return Err(Error::TooManyQubits(n_q));
    }
    let mut report = OptimizationReport::new(c0);
    let mut cur = c0.renumbered();
    for iter in 0..params.max_outer_iters {
        report.outer_iterations += 1;
        let before = cur.clone();
        let ga = GaParams { seed: iteration_seed(params.seed, iter), ..params.ga };
        let out = ga_optimize(&cur, ag, &ga, n_q)?;
        if out.circuit.depth() <= cur.depth() {
            let next = out.circuit.renumbered();
            if params.safety_verify && cur.num_qubits <= 10 && !equivalent(&cur, &next, 1e-9)? {
                return Err(Error::Invariant("commutation search changed the circuit unitary".into()));
            }
            cur = next;
        }

        let windows = extract_subcircuits(&cur, n_q);
        let scores = windows
            .par_iter()
            .map(|w| score_window(&cur, ag, w, predictor))
            .collect::<Result<Vec<_>>>()?;
        let d_opt: HashMap<usize, usize> = scores.iter().map(|s| (s.window.gate_ids[0], s.d_opt_est)).collect();
        let selected = select_top(&scores, params.sweep.n_t);
        // ids of `windows` refer to this snapshot; follow them through rewrites
        let mut remap: Vec<Option<usize>> = (0..cur.len()).map(Some).collect();
        for w in selected {
            let Some(ids) = w.gate_ids.iter().map(|&id| remap[id]).collect::<Option<Vec<_>>>() else { continue };
            let live = SubcircuitWindow::from_ids(&cur, &cur.layering(), &ids);
            let d_pred = d_opt[&w.gate_ids[0]];
            let rw = rewrite_window(&cur, ag, &live, d_pred, params.blocking, backend)?;
            report.sat_calls += rw.sat_calls;
            let Some(sp) = rw.splice else { continue };
            if !better(&sp.circuit, &cur) {
                continue;
            }
            if params.safety_verify {
                check_rewrite(&cur, &sp.circuit, &live, &sp.local)?;
            }
            remap = remap.into_iter().map(|m| m.and_then(|id| sp.id_map[id])).collect();
            cur = sp.circuit;
            report.rewrites_accepted += 1;
        }
        if cur.check_compliance(|a, b| ag.is_edge(a, b)).is_err() {
            return Err(Error::Invariant("optimized circuit is not hardware compliant".into()));
        }
        if cur.depth() >= before.depth() {
            break;
        }
    }
    if cur.depth() > c0.depth() {
        return Err(Error::Invariant("depth increased".into()));
    }
    report.finish(&cur, started);
    Ok((cur, report))
}

/// Identity initial placement; each distant CNOT walks its control along a
/// shortest path with SWAPs (or its target, by coin flip).
pub fn naive_route(logical: &Circuit, ag: &ArchitectureGraph, seed: u64) -> Result<Circuit> {
    let n = ag.num_qubits();
    if logical.num_qubits > n {
        return Err(Error::Dimension(format!("{}-qubit circuit on a {n}-node graph", logical.num_qubits)));
    }
    if !ag.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phys: Vec<usize> = (0..n).collect();
    let mut out = Circuit::new(n);
    for g in logical.gates() {
        match g.qubits() {
            &[q] => {
                out.push(g.kind.clone(), &[phys[q]])?;
            }
            &[a, b] => {
                let (mut pa, mut pb) = (phys[a], phys[b]);
                if !ag.is_edge(pa, pb) {
                    let move_first = rng.gen_bool(0.5);
                    let (from, to) = if move_first { (pa, pb) } else { (pb, pa) };
                    let path = ag.shortest_path(from, to).ok_or(Error::Disconnected)?;
                    for step in path.windows(2).take(path.len() - 2) {
                        out.push(GateKind::Swap, &[step[0], step[1]])?;
                        let (la, lb) = (
                            phys.iter().position(|&p| p == step[0]).expect("placement is a bijection"),
                            phys.iter().position(|&p| p == step[1]).expect("placement is a bijection"),
                        );
                        phys.swap(la, lb);
                    }
                    pa = phys[a];
                    pb = phys[b];
                }
                out.push(g.kind.clone(), &[pa, pb])?;
            }
            _ => unreachable!("gates act on one or two qubits"),
        }
    }
    Ok(out)
}

/// Uniform random gates; a fraction `cnot_frac` are CNOTs on random pairs,
/// the rest single-qubit Clifford+T gates.
pub fn random_circuit(num_qubits: usize, gates: usize, cnot_frac: f64, rng: &mut impl Rng) -> Circuit {
    let singles = [GateKind::H, GateKind::X, GateKind::T, GateKind::Tdg, GateKind::S, GateKind::Sdg];
    let mut c = Circuit::new(num_qubits);
    for _ in 0..gates {
        if num_qubits >= 2 && rng.gen_bool(cnot_frac.clamp(0.0, 1.0)) {
            let a = rng.gen_range(0..num_qubits);
            let mut b = rng.gen_range(0..num_qubits - 1);
            if b >= a {
                b += 1;
            }
            c.push(GateKind::Cnot, &[a, b]).expect("qubits in range");
        } else {
            let k = singles.choose(rng).expect("non-empty").clone();
            c.push(k, &[rng.gen_range(0..num_qubits)]).expect("qubits in range");
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub file: String,
    pub report: Option<OptimizationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub entries: Vec<BenchEntry>,
    /// `1 - geomean(opt / ori)` over successful entries.
    pub mean_depth_improvement: Option<f64>,
    pub mean_gate_improvement: Option<f64>,
}

/// `1 - geomean(opt_i / ori_i)`, skipping pairs with `ori == 0`.
pub fn geomean_improvement(pairs: impl IntoIterator<Item = (usize, usize)>) -> Option<f64> {
    let logs: Vec<f64> = pairs
        .into_iter()
        .filter(|&(ori, _)| ori > 0)
        .map(|(ori, opt)| (opt as f64 / ori as f64).max(f64::MIN_POSITIVE).ln())
        .collect();
    if logs.is_empty() {
        return None;
    }
    Some(1.0 - (logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

impl BenchmarkReport {
    pub fn from_entries(entries: Vec<BenchEntry>) -> Self {
        let ok: Vec<&OptimizationReport> = entries.iter().filter_map(|e| e.report.as_ref()).collect();
        BenchmarkReport {
            mean_depth_improvement: geomean_improvement(ok.iter().map(|r| (r.original_depth, r.final_depth))),
            mean_gate_improvement: geomean_improvement(ok.iter().map(|r| (r.original_gate_count, r.final_gate_count))),
            entries,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.file.len()).max().unwrap_or(4).max(4);
        let mut s = format!(
            "{:<width$}  {:>7} {:>7} {:>8} {:>7} {:>7} {:>8} {:>9} {:>9}\n",
            "file", "dep_ori", "dep_opt", "dep_imp", "gat_ori", "gat_opt", "gat_imp", "sat_calls", "time_s"
        );
        for e in &self.entries {
            match (&e.report, &e.error) {
                (Some(r), _) => s.push_str(&format!(
                    "{:<width$}  {:>7} {:>7} {:>7.2}% {:>7} {:>7} {:>7.2}% {:>9} {:>9.2}\n",
                    e.file,
                    r.original_depth,
                    r.final_depth,
                    100.0 * r.depth_improvement_fraction,
                    r.original_gate_count,
                    r.final_gate_count,
                    100.0 * r.gate_improvement_fraction,
                    r.sat_calls,
                    r.runtime_seconds
                )),
                (None, err) => s.push_str(&format!("{:<width$}  error: {}\n", e.file, err.as_deref().unwrap_or("unknown"))),
            }
        }
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        s.push_str(&format!(
            "geomean depth improvement {}, gate improvement {}\n",
            pct(self.mean_depth_improvement),
            pct(self.mean_gate_improvement)
        ));
        s
    }
}

/// Optimizes every `.qasm` file of `dir` (sorted by name). Per-file failures
/// are recorded in the table.
pub fn run_benchmark(dir: &Path, ag: &ArchitectureGraph, params: &SsrParams) -> Result<BenchmarkReport> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qasm"))
        .collect();
    files.sort();
    let entries = files
        .par_iter()
        .map(|path| {
            let file = path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
            let result = std::fs::read_to_string(path)
                .map_err(Error::from)
                .and_then(|text| parse_qasm(&text))
                .and_then(|c| ssr_optimize(&c, ag, params));
            match result {
                Ok((_, r)) => BenchEntry { file, report: Some(r), error: None },
                Err(e) => BenchEntry { file, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(BenchmarkReport::from_entries(entries))
}
