//! Fully connected ReLU network trained with full-batch L-BFGS on the
//! asymmetric squared loss.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const LAYER_DIMS: [usize; 6] = [25, 200, 50, 100, 50, 1];
const SCHEMA: &str = "ssr-depth-model 1";

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub ag_key: String,
    pub dims: Vec<usize>,
    /// `weights[l]` has shape (dims[l+1], dims[l]).
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    /// Extra weight on overestimates.
    pub beta: f64,
    pub max_iters: usize,
    /// Number of correction pairs kept by L-BFGS.
    pub memory: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { beta: 1.0, max_iters: 500, memory: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss at initialization followed by the loss after each iteration.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss")
    }
}

/// Mean of `(y - p)^2`, weighted by `1 + beta` where `p > y`.
pub fn penalized_mse(preds: &[f64], labels: &[f64], beta: f64) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("no samples"));
    }
    if preds.len() != labels.len() {
        return Err(Error::Dimension(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let total: f64 = preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let e = (y - p) * (y - p);
            if p > y {
                (1.0 + beta) * e
            } else {
                e
            }
        })
        .sum();
    Ok(total / preds.len() as f64)
}

impl MlpModel {
    /// He-uniform weights, zero biases.
    pub fn random(ag_key: &str, dims: &[usize], seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[1], w[0]), |_| rng.gen_range(-bound..bound)));
            biases.push(Array1::zeros(w[1]));
        }
        MlpModel { ag_key: ag_key.to_string(), dims: dims.to_vec(), weights, biases }
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter().copied());
            v.extend(b.iter().copied());
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for x in w.iter_mut() {
                *x = p[i];
                i += 1;
            }
            for x in b.iter_mut() {
                *x = p[i];
                i += 1;
            }
        }
    }

    /// Network outputs for each row of `x`.
    pub fn forward(&self, x: &Array2<f64>) -> Array1<f64> {
        let mut a = x.clone();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t()) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a.column(0).to_owned()
    }

    pub fn predict_raw(&self, features: &[f64]) -> f64 {
        let x = Array2::from_shape_vec((1, features.len()), features.to_vec()).expect("one row");
        self.forward(&x)[0]
    }

    /// Loss and its gradient with respect to `params()`.
    pub fn loss_and_grad(&self, x: &Array2<f64>, y: &Array1<f64>, beta: f64) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let last = self.weights.len() - 1;
        let mut acts = vec![x.clone()];
        let mut zs = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(&w.t()) + b;
            let a = if l < last { z.mapv(|v| v.max(0.0)) } else { z.clone() };
            zs.push(z);
            acts.push(a);
        }
        let out = acts[last + 1].column(0);
        let mut loss = 0.0;
        let mut delta = Array2::zeros((x.nrows(), 1));
        for (i, (&p, &t)) in out.iter().zip(y).enumerate() {
            let wgt = if p > t { 1.0 + beta } else { 1.0 };
            loss += wgt * (p - t) * (p - t);
            delta[[i, 0]] = 2.0 * wgt * (p - t) / n;
        }
        loss /= n;
        let mut grads_w = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut grads_b = vec![Array1::zeros(0); self.weights.len()];
        for l in (0..=last).rev() {
            grads_w[l] = delta.t().dot(&acts[l]);
            grads_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l]);
                prev.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        let mut g = Vec::with_capacity(self.num_params());
        for (w, b) in grads_w.iter().zip(&grads_b) {
            g.extend(w.iter().copied());
            g.extend(b.iter().copied());
        }
        (loss, g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch L-BFGS with backtracking Armijo line search.
pub fn train_mlp(
    ag_key: &str,
    x: &Array2<f64>,
    y: &Array1<f64>,
    params: &TrainParams,
) -> Result<(MlpModel, TrainReport)> {
    if x.nrows() == 0 {
        return Err(Error::Empty("empty training set"));
    }
    let mut dims = LAYER_DIMS.to_vec();
    dims[0] = x.ncols();
    let mut model = MlpModel::random(ag_key, &dims, params.seed);
    let mut w = model.params();
    let eval = |model: &mut MlpModel, w: &[f64]| {
        model.set_params(w);
        model.loss_and_grad(x, y, params.beta)
    };
    let (mut f, mut g) = eval(&mut model, &w);
    if !f.is_finite() {
        return Err(Error::Divergence);
    }
    let mut losses = vec![f];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for _ in 0..params.max_iters {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-10 {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, yv, _)) => dot(s, yv) / dot(yv, yv),
            None => 1.0 / gnorm,
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, yv, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v / gnorm).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + step * di).collect();
            let (ft, gt) = eval(&mut model, &trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((nw, nf, ng)) = accepted else { break };
        let s: Vec<f64> = nw.iter().zip(&w).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if hist.len() == params.memory.max(1) {
                hist.pop_front();
            }
            hist.push_back((s, yv, 1.0 / sy));
        }
        let done = (f - nf).abs() <= 1e-14 * f.abs().max(1.0);
        w = nw;
        f = nf;
        g = ng;
        losses.push(f);
        if done {
            break;
        }
    }
    model.set_params(&w);
    Ok((model, TrainReport { losses }))
}

pub fn save_model(m: &MlpModel) -> String {
    let mut s = format!("{SCHEMA}\nag_key {}\ndims", m.ag_key);
    for d in &m.dims {
        s.push_str(&format!(" {d}"));
    }
    s.push('\n');
    for (l, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
        s.push_str(&format!("W{l}"));
        for v in w.iter() {
            s.push_str(&format!(" {v:.16e}"));
        }
        s.push_str(&format!("\nb{l}"));
        for v in b.iter() {
            s.push_str(&format!(" {v:.16e}"));
        }
        s.push('\n');
    }
    s
}

pub fn load_model(text: &str) -> Result<MlpModel> {
    let bad = |msg: String| Error::Schema(msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(SCHEMA) {
        return Err(bad(format!("expected header `{SCHEMA}`")));
    }
    let ag_key = lines
        .next()
        .and_then(|l| l.strip_prefix("ag_key "))
        .ok_or_else(|| bad("missing ag_key".into()))?
        .trim()
        .to_string();
    let dims: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("dims"))
        .ok_or_else(|| bad("missing dims".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(bad("dims must list at least two positive sizes".into()));
    }
    let mut values = |tag: String, len: usize| -> Result<Vec<f64>> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {tag}")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(tag.as_str()) {
            return Err(bad(format!("expected {tag}")));
        }
        let v: Vec<f64> = it
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(format!("bad value `{t}` in {tag}"))))
            .collect::<Result<_>>()?;
        if v.len() != len {
            return Err(bad(format!("{tag} has {} values, expected {len}", v.len())));
        }
        Ok(v)
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        let wv = values(format!("W{l}"), w[0] * w[1])?;
        weights.push(Array2::from_shape_vec((w[1], w[0]), wv).expect("length checked"));
        biases.push(Array1::from(values(format!("b{l}"), w[1])?));
    }
    if lines.next().is_some() {
        return Err(bad("trailing data".into()));
    }
    Ok(MlpModel { ag_key, dims, weights, biases })
}
