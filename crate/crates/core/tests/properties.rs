use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssr_core::commute::{applicable_pairs, fitness, ga_optimize, mutate, try_commute, CommutationGenome, GaParams};
use ssr_core::driver::{naive_route, ssr_optimize, SsrParams};
use ssr_core::predictor::mlp::penalized_mse;
use ssr_core::predictor::{featurize, DepthPredictor, OraclePredictor};
use ssr_core::qasm::{emit_qasm, parse_qasm};
use ssr_core::sweep::extract_subcircuits;
use ssr_core::synth::bfs::bfs_oracle;
use ssr_core::synth::cnf::BlockedPosition;
use ssr_core::synth::{depth_cap, synthesize, Cadical};
use ssr_core::verify::{equivalent, linear_equivalent, simulate};
use ssr_core::{ArchitectureGraph, Circuit, Error, GF2Matrix, GateKind};

fn single(k: u8) -> GateKind {
    match k % 8 {
        0 => GateKind::H,
        1 => GateKind::X,
        2 => GateKind::T,
        3 => GateKind::Tdg,
        4 => GateKind::S,
        5 => GateKind::Sdg,
        6 => GateKind::rz("pi/4"),
        _ => GateKind::u("y"),
    }
}

/// Gates as (kind selector, qubit a, qubit b); decoded against a width.
fn raw_gates(max: usize) -> impl Strategy<Value = Vec<(u8, usize, usize)>> {
    prop::collection::vec((any::<u8>(), 0usize..64, 0usize..64), 0..max)
}

fn build(n: usize, raw: &[(u8, usize, usize)], linear_only: bool) -> Circuit {
    let mut c = Circuit::new(n);
    for &(k, a, b) in raw {
        let (a, b) = (a % n, b % n);
        let two = linear_only || k % 3 != 0;
        if two && n >= 2 {
            let b = if a == b { (a + 1) % n } else { b };
            let kind = if k % 5 == 0 { GateKind::Swap } else { GateKind::Cnot };
            c.push(kind, &[a, b]).unwrap();
        } else if !linear_only {
            c.push(single(k / 3), &[a]).unwrap();
        }
    }
    c
}

/// Gates restricted to the edges of `ag`.
fn build_on(ag: &ArchitectureGraph, raw: &[(u8, usize, usize)]) -> Circuit {
    let edges = ag.directed_edges();
    let mut c = Circuit::new(ag.num_qubits());
    for &(k, a, _) in raw {
        if k % 3 == 0 {
            c.push(single(k / 3), &[a % ag.num_qubits()]).unwrap();
        } else {
            let (x, y) = edges[a % edges.len()];
            let kind = if k % 5 == 0 { GateKind::Swap } else { GateKind::Cnot };
            c.push(kind, &[x, y]).unwrap();
        }
    }
    c
}

fn arb_graph() -> impl Strategy<Value = ArchitectureGraph> {
    (2usize..=5, any::<u32>()).prop_map(|(n, bits)| {
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| ((bits as usize >> v) % v, v)).collect();
        let mut k = 0;
        for a in 0..n {
            for b in a + 1..n {
                if bits >> (k % 32) & 1 == 1 {
                    edges.push((a, b));
                }
                k += 1;
            }
        }
        edges.sort();
        edges.dedup();
        ArchitectureGraph::new(n, edges).unwrap()
    })
}

fn random_target(ag: &ArchitectureGraph, walk: &[usize]) -> GF2Matrix {
    let edges = ag.directed_edges();
    let mut m = GF2Matrix::identity(ag.num_qubits());
    for &i in walk {
        let (c, t) = edges[i % edges.len()];
        m.cnot_in_place(c, t).unwrap();
    }
    m
}

fn permute(ag: &ArchitectureGraph, perm: &[usize]) -> ArchitectureGraph {
    ArchitectureGraph::new(ag.num_qubits(), ag.edges().map(|(a, b)| (perm[a], perm[b]))).unwrap()
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn depth_counts_decomposed_swaps(n in 1usize..6, raw in raw_gates(30)) {
        let c = build(n, &raw, false);
        prop_assert_eq!(c.depth(), c.decompose_swaps().depth());
    }

    #[test]
    fn layering_has_no_overlap(n in 1usize..6, raw in raw_gates(30)) {
        let c = build(n, &raw, false);
        let l = c.layering();
        for layer in &l.layers {
            let mut used = HashSet::new();
            for &id in layer {
                for &q in c.gate_by_id(id).unwrap().qubits() {
                    prop_assert!(used.insert(q));
                }
            }
        }
        prop_assert_eq!(l.depth(), c.depth());
    }

    #[test]
    fn layering_ignores_gate_ids(n in 2usize..6, raw in raw_gates(30), pick in any::<usize>()) {
        let ag = ArchitectureGraph::complete(n);
        let c = build(n, &raw, false);
        let pairs = applicable_pairs(&c, &ag);
        let moved = if pairs.is_empty() { c.clone() } else { try_commute(&c, &ag, pairs[pick % pairs.len()]).unwrap() };
        let by_pos = |c: &Circuit| c.gates().iter().map(|g| c.layering().layer_of[g.id]).collect::<Vec<_>>();
        prop_assert_eq!(by_pos(&moved), by_pos(&moved.renumbered()));
    }

    #[test]
    fn qasm_round_trip(n in 1usize..6, raw in raw_gates(30)) {
        let c = build(n, &raw, false);
        let back = parse_qasm(&emit_qasm(&c)).unwrap();
        prop_assert!(back.same_ops(&c));
    }

    #[test]
    fn canonical_key_ignores_labels(ag in arb_graph(), seed in any::<u64>()) {
        let n = ag.num_qubits();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ag.canonical_key().unwrap(), permute(&ag, &perm).canonical_key().unwrap());
    }

    #[test]
    fn induced_subgraph_keeps_adjacency(ag in arb_graph(), mask in any::<u8>()) {
        let qubits: Vec<usize> = (0..ag.num_qubits()).filter(|q| mask >> q & 1 == 1).collect();
        let (sub, map) = ag.induced_subgraph(&qubits);
        prop_assert_eq!(sub.num_qubits(), qubits.len());
        for i in 0..qubits.len() {
            for j in 0..qubits.len() {
                if i != j {
                    prop_assert_eq!(sub.is_edge(i, j), ag.is_edge(map[i], map[j]));
                }
            }
        }
    }

    #[test]
    fn matrix_of_concatenation(n in 1usize..7, a in raw_gates(20), b in raw_gates(20)) {
        let (c1, c2) = (build(n, &a, true), build(n, &b, true));
        let joined = Circuit::from_gates(n, c1.gates().iter().chain(c2.gates()).cloned()).unwrap();
        let (m1, m2) = (GF2Matrix::from_circuit(&c1).unwrap(), GF2Matrix::from_circuit(&c2).unwrap());
        let m = GF2Matrix::from_circuit(&joined).unwrap();
        prop_assert_eq!(&m, &m2.multiply(&m1).unwrap());
        prop_assert!(m.is_invertible());
    }

    #[test]
    fn linear_check_agrees_with_simulation(n in 1usize..6, a in raw_gates(12), b in raw_gates(12), same in any::<bool>()) {
        let c1 = build(n, &a, true);
        let c2 = if same {
            // an inverse pair in front changes nothing
            let c = if n >= 2 { Circuit::new(n).cx(0, 1).cx(0, 1) } else { Circuit::new(n) };
            Circuit::from_gates(n, c.gates().iter().chain(c1.gates()).cloned()).unwrap()
        } else {
            build(n, &b, true)
        };
        prop_assert_eq!(linear_equivalent(&c1, &c2, n).unwrap(), equivalent(&c1, &c2, 1e-9).unwrap());
    }

    #[test]
    fn decomposition_preserves_simulation(n in 1usize..5, raw in raw_gates(20), input in any::<usize>()) {
        let c = build(n, &raw, false);
        let input = input % (1 << n);
        let a = simulate(&c, input).unwrap();
        let b = simulate(&c.decompose_swaps(), input).unwrap();
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn commutation_preserves_unitary(raw in raw_gates(25), pick in any::<usize>()) {
        let ag = ArchitectureGraph::grid(2, 2);
        let c = build_on(&ag, &raw);
        let pairs = applicable_pairs(&c, &ag);
        prop_assume!(!pairs.is_empty());
        let moved = try_commute(&c, &ag, pairs[pick % pairs.len()]).unwrap();
        prop_assert!(moved.check_compliance(|a, b| ag.is_edge(a, b)).is_ok());
        prop_assert!(equivalent(&c, &moved, 1e-9).unwrap());
        let ids = |c: &Circuit| { let mut v: Vec<usize> = c.gates().iter().map(|g| g.id).collect(); v.sort(); v };
        prop_assert_eq!(ids(&c), ids(&moved));
    }

    #[test]
    fn fitness_of_base_is_zero(raw in raw_gates(30)) {
        let c = build_on(&ArchitectureGraph::path(4), &raw);
        if let Ok(f) = fitness(&c, &c, 0.9, 5) {
            prop_assert_eq!(f.fit, 0.0);
        }
    }

    #[test]
    fn windows_partition_linear_gates(n in 1usize..7, raw in raw_gates(40), n_q in 2usize..6) {
        let c = build(n, &raw, false);
        let ws = extract_subcircuits(&c, n_q);
        prop_assert_eq!(&ws, &extract_subcircuits(&c, n_q));
        let mut seen = HashSet::new();
        for w in &ws {
            prop_assert!(w.qubits.len() <= n_q);
            for &id in &w.gate_ids {
                prop_assert!(c.gate_by_id(id).unwrap().kind.is_linear());
                prop_assert!(seen.insert(id));
            }
            // convex: no outside gate lies between two window gates
            let inside = w.id_set();
            let reach = reachable_from(&c, &inside);
            let back = reaching(&c, &inside);
            for g in c.gates() {
                prop_assert!(inside.contains(&g.id) || !(reach.contains(&g.id) && back.contains(&g.id)));
            }
        }
        let linear = c.gates().iter().filter(|g| g.kind.is_linear()).count();
        prop_assert_eq!(seen.len(), linear);
    }

    #[test]
    fn loss_penalizes_overestimates(y in -20.0f64..20.0, delta in 0.001f64..5.0, beta in 0.0f64..4.0) {
        let over = penalized_mse(&[y + delta], &[y], beta).unwrap();
        let under = penalized_mse(&[y - delta], &[y], beta).unwrap();
        prop_assert!((over - (1.0 + beta) * under).abs() <= 1e-12 * over.max(1.0));
    }

    #[test]
    fn featurize_is_injective(n in 1usize..=5, a in any::<u32>(), b in any::<u32>()) {
        let mask = (1u64 << (n * n)) - 1;
        let (ma, mb) = (GF2Matrix::unpack(n, a as u64 & mask), GF2Matrix::unpack(n, b as u64 & mask));
        prop_assert_eq!(ma == mb, featurize(&ma).unwrap() == featurize(&mb).unwrap());
    }
}

/// Gates reachable from `ids` along the dependency order, excluding `ids`.
fn reachable_from(c: &Circuit, ids: &HashSet<usize>) -> HashSet<usize> {
    let mut tainted = vec![false; c.num_qubits];
    let mut out = HashSet::new();
    for g in c.gates() {
        let hit = g.qubits().iter().any(|&q| tainted[q]);
        if hit && !ids.contains(&g.id) {
            out.insert(g.id);
        }
        if hit || ids.contains(&g.id) {
            for &q in g.qubits() {
                tainted[q] = true;
            }
        }
    }
    out
}

/// Gates from which `ids` are reachable, excluding `ids`.
fn reaching(c: &Circuit, ids: &HashSet<usize>) -> HashSet<usize> {
    let mut tainted = vec![false; c.num_qubits];
    let mut out = HashSet::new();
    for g in c.gates().iter().rev() {
        let hit = g.qubits().iter().any(|&q| tainted[q]);
        if hit && !ids.contains(&g.id) {
            out.insert(g.id);
        }
        if hit || ids.contains(&g.id) {
            for &q in g.qubits() {
                tainted[q] = true;
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesis_is_sound_and_optimal(ag in arb_graph().prop_filter("small", |g| g.num_qubits() <= 4), walk in prop::collection::vec(any::<usize>(), 0..10)) {
        let m = random_target(&ag, &walk);
        let want = bfs_oracle(&m, &ag, depth_cap(m.n()), None).unwrap().unwrap();
        let mut depths = HashSet::new();
        for d_pred in 0..6 {
            let r = synthesize(&m, &ag, &[], d_pred, &Cadical).unwrap();
            prop_assert_eq!(&GF2Matrix::from_circuit(&r.circuit).unwrap(), &m);
            prop_assert!(r.circuit.check_compliance(|a, b| ag.is_edge(a, b)).is_ok());
            depths.insert(r.achieved_depth);
        }
        prop_assert_eq!(depths.into_iter().collect::<Vec<_>>(), vec![want]);
    }

    #[test]
    fn blocks_are_respected_and_monotone(
        n in 2usize..=4,
        walk in prop::collection::vec(any::<usize>(), 1..8),
        blocks in prop::collection::vec((0usize..4, 0usize..4), 1..4),
    ) {
        let ag = ArchitectureGraph::path(n);
        let m = random_target(&ag, &walk);
        let blocks: Vec<BlockedPosition> = blocks.into_iter().map(|(d, q)| BlockedPosition { d, q: q % n }).collect();
        let mut last = 0;
        for k in 0..=blocks.len() {
            match synthesize(&m, &ag, &blocks[..k], 1, &Cadical) {
                Ok(r) => {
                    for (g, &d) in r.circuit.gates().iter().zip(&r.layer_of) {
                        for &q in g.qubits() {
                            let slot = BlockedPosition { d, q };
                            prop_assert!(!blocks[..k].contains(&slot));
                        }
                    }
                    prop_assert_eq!(&GF2Matrix::from_circuit(&r.circuit).unwrap(), &m);
                    prop_assert!(r.achieved_depth >= last);
                    last = r.achieved_depth;
                }
                Err(Error::DepthCapExceeded(_)) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn splice_depth_bounded_by_remainder_and_replacement(raw in raw_gates(25)) {
        let ag = ArchitectureGraph::path(3);
        let c = build_on(&ag, &raw);
        for w in extract_subcircuits(&c, 3).into_iter().filter(|w| !w.singleton) {
            let r = synthesize(&w.matrix(&c).unwrap(), &w.local_ag(&ag), &[], 1, &Cadical).unwrap();
            let physical = w.to_physical(&r.circuit, c.num_qubits).unwrap();
            let Ok(spliced) = c.replace_window(&w.id_set(), &physical, w.anchor) else { continue };
            let remainder = c.without(&w.id_set()).depth();
            prop_assert!(spliced.depth() >= remainder.max(r.achieved_depth));
        }
    }

    #[test]
    fn oracle_prediction_is_relabeling_invariant(walk in prop::collection::vec(any::<usize>(), 0..12), perm in arb_perm(4)) {
        let ag = ArchitectureGraph::path(4);
        let m = random_target(&ag, &walk);
        let moved = m.relabeled(&perm);
        let a = OraclePredictor.predict(&m, &ag).unwrap();
        let b = OraclePredictor.predict(&moved, &permute(&ag, &perm)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mutation_keeps_circuits_valid(raw in raw_gates(25), seed in any::<u64>()) {
        let ag = ArchitectureGraph::cycle(4);
        let c = build_on(&ag, &raw);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CommutationGenome::new(std::sync::Arc::new(c.clone()));
        for _ in 0..3 {
            g = mutate(&g, &ag, &mut rng).unwrap();
            let out = g.replay(&ag).unwrap();
            prop_assert!(out.check_compliance(|a, b| ag.is_edge(a, b)).is_ok());
            prop_assert!(equivalent(&c, &out, 1e-9).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ga_is_deterministic(raw in raw_gates(30), seed in any::<u64>()) {
        let ag = ArchitectureGraph::path(4);
        let c = build_on(&ag, &raw);
        let params = GaParams { t_max: 10, t_idle: 4, seed, ..GaParams::default() };
        let a = ga_optimize(&c, &ag, &params, 5).unwrap();
        let b = ga_optimize(&c, &ag, &params, 5).unwrap();
        prop_assert!(a.circuit.same_ops(&b.circuit));
        prop_assert_eq!(a.history, b.history);
    }

    #[test]
    fn optimization_is_safe_and_deterministic(raw in raw_gates(30), seed in 0u64..1000) {
        let ag = ArchitectureGraph::grid(2, 2);
        let logical = build(4, &raw, false);
        let c = naive_route(&logical, &ag, seed).unwrap();
        let params = SsrParams { seed, max_outer_iters: 3, ga: GaParams { t_max: 10, t_idle: 4, ..GaParams::default() }, ..SsrParams::default() };
        let (out, r) = ssr_optimize(&c, &ag, &params).unwrap();
        prop_assert!(r.final_depth <= r.original_depth);
        prop_assert_eq!(out.depth(), r.final_depth);
        prop_assert!(out.check_compliance(|a, b| ag.is_edge(a, b)).is_ok());
        prop_assert!(equivalent(&c, &out, 1e-9).unwrap());
        let (again, r2) = ssr_optimize(&c, &ag, &params).unwrap();
        prop_assert_eq!(emit_qasm(&out), emit_qasm(&again));
        prop_assert_eq!(r.without_runtime(), r2.without_runtime());
    }
}
