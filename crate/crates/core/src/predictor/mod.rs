//! Optimal-depth estimates for windows of at most five qubits.

pub mod mlp;

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::arch::ArchitectureGraph;
use crate::error::{Error, Result};
use crate::gf2::GF2Matrix;
use crate::synth::bfs::DepthTable;

pub use mlp::{load_model, penalized_mse, save_model, MlpModel, TrainParams, TrainReport};

/// Width of the padded frame fed to the network.
pub const FRAME: usize = 5;
/// Largest prediction, the gate-count bound for five qubits.
pub const MAX_PREDICTION: usize = FRAME * FRAME;

pub trait DepthPredictor: Send + Sync {
    /// Estimated optimal layer count of `target` on `ag` (same size).
    fn predict(&self, target: &GF2Matrix, ag: &ArchitectureGraph) -> Result<usize>;
}

fn table_cache() -> &'static Mutex<HashMap<String, Arc<DepthTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<DepthTable>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn relabeled_graph(ag: &ArchitectureGraph, perm: &[usize]) -> ArchitectureGraph {
    ArchitectureGraph::new(ag.num_qubits(), ag.edges().map(|(a, b)| (perm[a], perm[b]))).expect("relabeling keeps edges valid")
}

/// Depth table of the canonical relabeling of `ag`, shared process-wide,
/// with the permutation mapping `ag`'s labels onto it.
pub fn canonical_table(ag: &ArchitectureGraph) -> Result<(Arc<DepthTable>, Vec<usize>)> {
    let form = ag.canonical_form()?;
    let mut cache = table_cache().lock().expect("table cache poisoned");
    if let Some(t) = cache.get(&form.key) {
        return Ok((t.clone(), form.perm));
    }
    let table = Arc::new(DepthTable::build(&relabeled_graph(ag, &form.perm))?);
    cache.insert(form.key, table.clone());
    Ok((table, form.perm))
}

/// Exact optimal depth from breadth-first search tables.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePredictor;

impl DepthPredictor for OraclePredictor {
    fn predict(&self, target: &GF2Matrix, ag: &ArchitectureGraph) -> Result<usize> {
        if target.n() != ag.num_qubits() {
            return Err(Error::Dimension(format!("{}-qubit target on a {}-node graph", target.n(), ag.num_qubits())));
        }
        let (table, perm) = canonical_table(ag)?;
        table
            .depth(&target.relabeled(&perm))
            .ok_or_else(|| Error::Invariant("target not reachable on the window graph".into()))
    }
}

/// Identity-padded 5x5 frame, row-major, as 0.0/1.0.
pub fn featurize(m: &GF2Matrix) -> Result<Vec<f64>> {
    if m.n() > FRAME {
        return Err(Error::TooManyQubits(m.n()));
    }
    let p = m.padded(FRAME);
    Ok((0..FRAME * FRAME).map(|i| if p.get(i / FRAME, i % FRAME) { 1.0 } else { 0.0 }).collect())
}

/// Key and relabeling of the five-node frame a window graph is padded to.
pub fn frame_form(ag: &ArchitectureGraph) -> Result<(String, Vec<usize>)> {
    if ag.num_qubits() > FRAME {
        return Err(Error::TooManyQubits(ag.num_qubits()));
    }
    let f = ag.padded(FRAME).canonical_form()?;
    Ok((f.key, f.perm))
}

/// Per-topology networks, with the exact oracle for unknown topologies.
#[derive(Debug, Clone, Default)]
pub struct MlpPredictor {
    pub models: HashMap<String, MlpModel>,
}

impl MlpPredictor {
    pub fn new(models: impl IntoIterator<Item = MlpModel>) -> Self {
        MlpPredictor { models: models.into_iter().map(|m| (m.ag_key.clone(), m)).collect() }
    }
}

/// Rounded network output clamped to `[0, 25]`.
pub fn predict_with(model: &MlpModel, target: &GF2Matrix, perm: &[usize]) -> Result<usize> {
    let x = featurize(&target.padded(FRAME).relabeled(perm))?;
    let raw = model.predict_raw(&x);
    Ok(if raw.is_finite() { raw.round().clamp(0.0, MAX_PREDICTION as f64) as usize } else { 0 })
}

impl DepthPredictor for MlpPredictor {
    fn predict(&self, target: &GF2Matrix, ag: &ArchitectureGraph) -> Result<usize> {
        if target.is_identity() {
            return Ok(0);
        }
        let (key, perm) = frame_form(ag)?;
        match self.models.get(&key) {
            Some(m) => predict_with(m, target, &perm),
            None => {
                log::info!("no depth model for topology {key}; using the exact oracle");
                OraclePredictor.predict(target, ag)
            }
        }
    }
}

/// A matrix in the canonical labeling of its padded frame, with its optimal depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub matrix: GF2Matrix,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub ag_key: String,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn features(&self) -> Result<(Array2<f64>, Array1<f64>)> {
        let n = self.samples.len();
        let mut x = Array2::zeros((n, FRAME * FRAME));
        for (i, s) in self.samples.iter().enumerate() {
            for (j, v) in featurize(&s.matrix)?.into_iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        Ok((x, self.samples.iter().map(|s| s.label as f64).collect()))
    }

    /// `# ag_key` header, then one "bits label" line per sample.
    pub fn to_text(&self) -> String {
        let mut s = format!("# ag_key {}\n", self.ag_key);
        for smp in &self.samples {
            let bits: String = featurize(&smp.matrix)
                .expect("samples fit the frame")
                .iter()
                .map(|&v| if v > 0.5 { '1' } else { '0' })
                .collect();
            s.push_str(&format!("{bits} {}\n", smp.label));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Dataset> {
        let mut ag_key = String::new();
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(k) = line.strip_prefix("# ag_key ") {
                ag_key = k.trim().to_string();
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, col: 1, msg: msg.to_string() };
            let (bits, label) = line.split_once(' ').ok_or_else(|| bad("expected `bits label`"))?;
            if bits.len() != FRAME * FRAME || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(bad("expected 25 binary digits"));
            }
            let mut m = GF2Matrix::zero(FRAME);
            for (j, c) in bits.chars().enumerate() {
                m.set(j / FRAME, j % FRAME, c == '1');
            }
            let label = label.trim().parse().map_err(|_| bad("bad label"))?;
            samples.push(LabeledSample { matrix: m, label });
        }
        Ok(Dataset { ag_key, samples })
    }
}

/// Random reachable matrices (1..=20 random edge row operations applied to
/// the identity) plus harvested ones, deduplicated and labeled exactly.
/// The identity is always the first sample.
pub fn generate_dataset(
    ag: &ArchitectureGraph,
    count: usize,
    rng: &mut impl Rng,
    harvest: &[GF2Matrix],
) -> Result<Dataset> {
    let n = ag.num_qubits();
    let (key, perm) = frame_form(ag)?;
    let (table, tperm) = canonical_table(ag)?;
    let edges = ag.directed_edges();
    let mut seen = HashSet::new();
    let mut mats = vec![GF2Matrix::identity(n)];
    seen.insert(GF2Matrix::identity(n));
    for m in harvest {
        if m.n() == n && seen.insert(m.clone()) {
            mats.push(m.clone());
        }
    }
    let mut attempts = 0;
    while mats.len() < count.max(1) && attempts < 50 * count.max(1) && !edges.is_empty() {
        attempts += 1;
        let mut m = GF2Matrix::identity(n);
        for _ in 0..rng.gen_range(1..=20) {
            let &(c, t) = edges.choose(rng).expect("non-empty edge list");
            m.cnot_in_place(c, t)?;
        }
        if seen.insert(m.clone()) {
            mats.push(m);
        }
    }
    let samples = mats
        .into_iter()
        .map(|m| {
            let label = table
                .depth(&m.relabeled(&tperm))
                .ok_or_else(|| Error::Invariant("harvested matrix not reachable on the graph".into()))?;
            Ok(LabeledSample { matrix: m.padded(FRAME).relabeled(&perm), label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { ag_key: key, samples })
}

/// Every matrix reachable on `ag`, labeled, in the dataset layout.
pub fn exhaustive_dataset(ag: &ArchitectureGraph) -> Result<Dataset> {
    let (key, perm) = frame_form(ag)?;
    let (table, tperm) = canonical_table(ag)?;
    let mut inv = vec![0; tperm.len()];
    for (i, &p) in tperm.iter().enumerate() {
        inv[p] = i;
    }
    let samples = table
        .reachable()
        .map(|(m, label)| LabeledSample { matrix: m.relabeled(&inv).padded(FRAME).relabeled(&perm), label })
        .collect();
    Ok(Dataset { ag_key: key, samples })
}

pub fn train(dataset: &Dataset, params: &TrainParams) -> Result<(MlpModel, TrainReport)> {
    let (x, y) = dataset.features()?;
    mlp::train_mlp(&dataset.ag_key, &x, &y, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn featurize_examples() {
        let ones = |v: &[f64]| -> Vec<usize> { (0..v.len()).filter(|&i| v[i] == 1.0).collect() };
        assert_eq!(ones(&featurize(&GF2Matrix::identity(5)).unwrap()), vec![0, 6, 12, 18, 24]);
        assert_eq!(ones(&featurize(&GF2Matrix::identity(3)).unwrap()), vec![0, 6, 12, 18, 24]);
        let m = GF2Matrix::parse("100\n110\n111").unwrap();
        assert_eq!(ones(&featurize(&m).unwrap()), vec![0, 5, 6, 10, 11, 12, 18, 24]);
        assert!(featurize(&GF2Matrix::identity(6)).is_err());
    }

    #[test]
    fn oracle_predictions() {
        let p3 = ArchitectureGraph::path(3);
        assert_eq!(OraclePredictor.predict(&GF2Matrix::identity(3), &p3).unwrap(), 0);
        assert_eq!(OraclePredictor.predict(&GF2Matrix::parse("100\n110\n111").unwrap(), &p3).unwrap(), 2);
        // relabeled graph, relabeled matrix
        let other = ArchitectureGraph::new(3, [(1, 0), (0, 2)]).unwrap();
        let perm = [1, 0, 2];
        let m = GF2Matrix::parse("100\n110\n111").unwrap().relabeled(&perm);
        assert_eq!(OraclePredictor.predict(&m, &other).unwrap(), 2);
    }

    #[test]
    fn dataset_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p5 = ArchitectureGraph::path(5);
        let d = generate_dataset(&p5, 50, &mut rng, &[]).unwrap();
        assert_eq!(d.samples.len(), 50);
        assert_eq!(d.samples[0], LabeledSample { matrix: GF2Matrix::identity(5), label: 0 });
        let c5 = generate_dataset(&ArchitectureGraph::cycle(5), 5, &mut rng, &[]).unwrap();
        assert_ne!(d.ag_key, c5.ag_key);
        assert_eq!(Dataset::from_text(&d.to_text()).unwrap(), d);
        let all = exhaustive_dataset(&ArchitectureGraph::path(3)).unwrap();
        assert_eq!(all.samples.len(), 168);
    }
}
