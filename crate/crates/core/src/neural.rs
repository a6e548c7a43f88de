//! Multi-layer perceptron regressor with rectifier hidden layers.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_xy, ModelError};
use crate::linalg::Matrix;
use crate::mlcore::{param_f64, param_usize, ModelFamily, ParamValue, Params, Predict};
use crate::rng::{derive_seed, seeded, DEFAULT_SEED};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Full size chain including input and output, e.g. `[d, 32, 16, 1]`.
    pub layers: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Reorder rows each epoch; batches are contiguous chronological blocks otherwise.
    pub shuffle: bool,
    pub seed: u64,
}

impl MlpParams {
    pub fn for_input(d: usize) -> Self {
        let mut layers = vec![d];
        layers.extend(DEFAULT_HIDDEN);
        layers.push(1);
        Self { layers, lr: 0.01, epochs: 200, batch_size: 32, shuffle: false, seed: DEFAULT_SEED }
    }
}

/// One affine layer; `w` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }

    fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.w.chunks_exact(self.n_in).zip(&self.b)) {
            *o = crate::linalg::dot(row, input) + b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<usize>,
    pub dense: Vec<Dense>,
    /// Target standardization; predictions are `net(x) · y_scale + y_mean`.
    pub y_mean: f64,
    pub y_scale: f64,
    /// Mean training loss per epoch, in standardized target units.
    pub trace: Vec<f64>,
    /// Units per hidden layer that never fired during the last epoch.
    pub dead_units: Vec<usize>,
}

fn check_layers(layers: &[usize]) -> Result<(), ModelError> {
    if layers.len() < 2 || layers.contains(&0) || layers.last() != Some(&1) {
        return Err(ModelError::InvalidParam(format!("layer sizes {layers:?} must be positive and end in 1")));
    }
    Ok(())
}

impl MlpModel {
    /// Random network with weights drawn from `N(0, 1) / √fan_in` and zero biases.
    pub fn init(layers: &[usize], seed: u64) -> Result<Self, ModelError> {
        check_layers(layers)?;
        let mut rng = seeded(seed);
        let dense = layers
            .windows(2)
            .map(|w| {
                let mut d = Dense::zeros(w[0], w[1]);
                let s = 1.0 / (w[0] as f64).sqrt();
                d.w.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(StandardNormal) * s);
                d
            })
            .collect();
        Ok(Self { layers: layers.to_vec(), dense, y_mean: 0.0, y_scale: 1.0, trace: Vec::new(), dead_units: Vec::new() })
    }

    pub fn n_params(&self) -> usize {
        self.dense.iter().map(|d| d.w.len() + d.b.len()).sum()
    }

    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for d in &mut self.dense {
            if k < d.w.len() {
                return &mut d.w[k];
            }
            k -= d.w.len();
            if k < d.b.len() {
                return &mut d.b[k];
            }
            k -= d.b.len();
        }
        panic!("parameter index out of range")
    }

    /// Raw network output, before the target inverse transform.
    pub fn network_output(&self, row: &[f64]) -> f64 {
        let mut cur = row.to_vec();
        let last = self.dense.len() - 1;
        for (l, d) in self.dense.iter().enumerate() {
            let mut next = vec![0.0; d.n_out];
            d.forward(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            cur = next;
        }
        cur[0]
    }

    /// Mean squared error of raw outputs against `targets`.
    pub fn network_loss(&self, rows: &[&[f64]], targets: &[f64]) -> f64 {
        rows.iter().zip(targets).map(|(r, t)| (self.network_output(r) - t).powi(2)).sum::<f64>() / rows.len() as f64
    }

    /// Loss and its gradient by backpropagation; `fired` collects hidden
    /// units with a positive activation.
    fn loss_and_grad(&self, rows: &[&[f64]], targets: &[f64], mut fired: Option<&mut [Vec<bool>]>) -> (f64, Vec<Dense>) {
        let n = rows.len() as f64;
        let last = self.dense.len() - 1;
        let mut grads: Vec<Dense> = self.dense.iter().map(|d| Dense::zeros(d.n_in, d.n_out)).collect();
        let mut loss = 0.0;
        for (row, &t) in rows.iter().zip(targets) {
            let mut acts: Vec<Vec<f64>> = vec![row.to_vec()];
            for (l, d) in self.dense.iter().enumerate() {
                let mut next = vec![0.0; d.n_out];
                d.forward(&acts[l], &mut next);
                if l < last {
                    next.iter_mut().for_each(|v| *v = v.max(0.0));
                    if let Some(f) = fired.as_deref_mut() {
                        for (flag, &a) in f[l].iter_mut().zip(&next) {
                            *flag |= a > 0.0;
                        }
                    }
                }
                acts.push(next);
            }
            let r = acts[last + 1][0] - t;
            loss += r * r;
            let mut delta = vec![2.0 * r / n];
            for l in (0..=last).rev() {
                let d = &self.dense[l];
                let g = &mut grads[l];
                let input = &acts[l];
                for (o, &dl) in delta.iter().enumerate() {
                    g.b[o] += dl;
                    for (gw, &a) in g.w[o * d.n_in..(o + 1) * d.n_in].iter_mut().zip(input) {
                        *gw += dl * a;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; d.n_in];
                    for (o, &dl) in delta.iter().enumerate() {
                        for (p, &w) in prev.iter_mut().zip(&d.w[o * d.n_in..(o + 1) * d.n_in]) {
                            *p += dl * w;
                        }
                    }
                    for (p, &a) in prev.iter_mut().zip(input) {
                        if a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss / n, grads)
    }

    /// Backpropagated gradient flattened in parameter order (per layer: weights, then biases).
    pub fn gradient(&self, x: &Matrix, targets: &[f64]) -> Vec<f64> {
        let rows: Vec<&[f64]> = x.rows_iter().collect();
        let (_, g) = self.loss_and_grad(&rows, targets, None);
        g.into_iter().flat_map(|d| d.w.into_iter().chain(d.b)).collect()
    }

    /// Weights and intercept of a network without hidden layers, mapped back
    /// to original target units.
    pub fn linear_coefficients(&self) -> Option<(Vec<f64>, f64)> {
        match self.dense.as_slice() {
            [d] => Some((d.w.iter().map(|w| w * self.y_scale).collect(), d.b[0] * self.y_scale + self.y_mean)),
            _ => None,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.network_output(row) * self.y_scale + self.y_mean
    }
}

impl Predict for MlpModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        crate::par::map_indexed(x.nrows(), |i| self.predict_row(x.row(i)))
    }
}

/// Largest relative disagreement between backpropagated gradients and
/// central differences with step `1e-5`, taken over every parameter.
/// Targets are compared with raw network outputs.
pub fn gradient_check(model: &MlpModel, x: &Matrix, targets: &[f64]) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    const H: f64 = 1e-5;
    let rows: Vec<&[f64]> = x.rows_iter().collect();
    let analytic = model.gradient(x, targets);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + H;
        let up = probe.network_loss(&rows, targets);
        *probe.param_mut(k) = orig - H;
        let down = probe.network_loss(&rows, targets);
        *probe.param_mut(k) = orig;
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6));
    }
    worst
}

/// Mini-batch gradient descent on mean squared error with an internally
/// standardized target.
pub fn fit_mlp(x: &Matrix, y: &[f64], params: &MlpParams) -> Result<MlpModel, ModelError> {
    check_xy(x.nrows(), y)?;
    if !x.is_standardized() {
        return Err(ModelError::NotStandardized);
    }
    check_layers(&params.layers)?;
    if params.layers[0] != x.ncols() {
        return Err(ModelError::DimensionMismatch { expected: params.layers[0], got: x.ncols() });
    }
    if params.batch_size == 0 || !(params.lr > 0.0) {
        return Err(ModelError::InvalidParam(format!("batch_size={} lr={}", params.batch_size, params.lr)));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(ModelError::InvalidParam(format!("non-finite target {v}")));
    }
    let model = MlpModel::init(&params.layers, params.seed)?;
    train_from(model, x, y, params)
}

fn train_from(mut model: MlpModel, x: &Matrix, y: &[f64], params: &MlpParams) -> Result<MlpModel, ModelError> {
    let n = y.len();
    model.y_mean = crate::linalg::mean(y);
    let sd = (y.iter().map(|v| (v - model.y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    model.y_scale = if sd > 0.0 { sd } else { 1.0 };
    let targets: Vec<f64> = y.iter().map(|v| (v - model.y_mean) / model.y_scale).collect();
    let all_rows: Vec<&[f64]> = x.rows_iter().collect();
    let initial = model.network_loss(&all_rows, &targets);
    let hidden = &params.layers[1..params.layers.len() - 1];
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        if params.shuffle {
            order.shuffle(&mut seeded(derive_seed(params.seed, epoch as u64)));
        }
        let mut fired: Vec<Vec<bool>> = hidden.iter().map(|&h| vec![false; h]).collect();
        let mut total = 0.0;
        for chunk in order.chunks(params.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| x.row(i)).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.loss_and_grad(&rows, &t, Some(&mut fired));
            total += loss * chunk.len() as f64;
            for (d, g) in model.dense.iter_mut().zip(&grads) {
                d.w.iter_mut().zip(&g.w).for_each(|(w, gw)| *w -= params.lr * gw);
                d.b.iter_mut().zip(&g.b).for_each(|(b, gb)| *b -= params.lr * gb);
            }
        }
        let mean_loss = total / n as f64;
        model.trace.push(mean_loss);
        if !mean_loss.is_finite() || mean_loss > 1e6 * initial.max(f64::MIN_POSITIVE) {
            return Err(ModelError::Divergence { epoch, loss: mean_loss, initial });
        }
        model.dead_units = fired.iter().map(|f| f.iter().filter(|&&a| !a).count()).collect();
        if let Some(layer) = fired.iter().position(|f| f.iter().all(|&a| !a)) {
            return Err(ModelError::AllUnitsDead { layer: layer + 1, epoch });
        }
    }
    Ok(model)
}

/// Parses a hidden-layer spec such as `32-16`; an empty string means none.
pub fn parse_hidden(s: &str) -> Result<Vec<usize>, ModelError> {
    if s.trim().is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split('-').map(|t| t.trim().parse::<usize>().map_err(|_| ModelError::InvalidParam(format!("hidden={s}")))).collect()
}

/// Grid-search adapter; params `lr`, `epochs`, `batch_size`, `hidden`.
#[derive(Debug, Clone, Copy)]
pub struct MlpFamily {
    pub seed: u64,
}

impl MlpFamily {
    pub fn params(&self, p: &Params, d: usize) -> Result<MlpParams, ModelError> {
        let base = MlpParams::for_input(d);
        let hidden = match p.get("hidden") {
            None => DEFAULT_HIDDEN.to_vec(),
            Some(ParamValue::Str(s)) => parse_hidden(s)?,
            Some(ParamValue::Int(h)) if *h > 0 => vec![*h as usize],
            Some(v) => return Err(ModelError::InvalidParam(format!("hidden={v}"))),
        };
        let mut layers = vec![d];
        layers.extend(hidden);
        layers.push(1);
        Ok(MlpParams {
            layers,
            lr: param_f64(p, "lr", base.lr)?,
            epochs: param_usize(p, "epochs", base.epochs)?,
            batch_size: param_usize(p, "batch_size", base.batch_size)?,
            shuffle: false,
            seed: self.seed,
        })
    }
}

impl ModelFamily for MlpFamily {
    type Model = MlpModel;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<MlpModel, ModelError> {
        fit_mlp(x, y, &self.params(p, x.ncols())?)
    }
}
