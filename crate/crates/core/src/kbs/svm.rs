use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_binary, ModelError};
use crate::linalg::{sq_dist, Matrix};
use crate::mlcore::Predict;
use crate::rng::{seeded, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// `None` uses `1 / d`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
    /// Cap on sweeps over the training set.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, gamma: None, tol: 1e-3, max_passes: 10, max_iter: 10_000, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Support rows, row-major, `n_support × d`.
    pub support: Vec<Vec<f64>>,
    /// `αᵢ yᵢ` for each support row, labels in {−1, +1}.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    /// False when the sweep cap was hit before `max_passes` quiet passes.
    pub converged: bool,
    /// Dual objective after each accepted pair update.
    #[serde(skip)]
    pub dual_trace: Vec<f64>,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

impl SvmModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support.iter().zip(&self.dual_coef).map(|(s, c)| c * rbf(s, row, self.gamma)).sum::<f64>() + self.bias
    }

    pub fn decision_function(&self, x: &Matrix) -> Vec<f64> {
        crate::par::map_indexed(x.nrows(), |i| self.decision(x.row(i)))
    }
}

impl Predict for SvmModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.decision_function(x).into_iter().map(|f| f64::from(u8::from(f >= 0.0))).collect()
    }
}

/// `Σα − ½ ΣΣ αᵢαⱼyᵢyⱼK(xᵢ, xⱼ)`.
pub fn svm_dual_objective(alpha: &[f64], y_pm: &[f64], kernel: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y_pm[i] * y_pm[j] * kernel[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

pub fn rbf_kernel_matrix(x: &Matrix, gamma: f64) -> Vec<f64> {
    let n = x.nrows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Full result of the SMO solver, including every α.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub dual_trace: Vec<f64>,
}

/// Simplified SMO on a precomputed kernel, labels in {−1, +1}.
pub fn smo(kernel: &[f64], y: &[f64], p: &SvmParams) -> SmoSolution {
    let n = y.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    // f(x_i) - b without the bias
    let mut fcache = vec![0.0; n];
    let mut rng = seeded(p.seed);
    let mut passes = 0;
    let mut iter = 0;
    let mut dual = 0.0;
    let mut trace = Vec::new();
    while passes < p.max_passes && iter < p.max_iter {
        iter += 1;
        let mut changed = 0;
        for i in 0..n {
            let ei = fcache[i] + b - y[i];
            if !((y[i] * ei < -p.tol && alpha[i] < p.c) || (y[i] * ei > p.tol && alpha[i] > 0.0)) {
                continue;
            }
            if n < 2 {
                break;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let ej = fcache[j] + b - y[j];
            let (ai, aj) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] { ((aj - ai).max(0.0), (p.c + aj - ai).min(p.c)) } else { ((ai + aj - p.c).max(0.0), (ai + aj).min(p.c)) };
            if lo >= hi {
                continue;
            }
            let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
            if eta >= 0.0 {
                continue;
            }
            let new_aj = (aj - y[j] * (ei - ej) / eta).clamp(lo, hi);
            if (new_aj - aj).abs() < 1e-5 {
                continue;
            }
            let snap = |a: f64| if a < 1e-12 * p.c { 0.0 } else if a > p.c * (1.0 - 1e-12) { p.c } else { a };
            let new_aj = snap(new_aj);
            let new_ai = snap(ai + y[i] * y[j] * (aj - new_aj));
            let (dai, daj) = (new_ai - ai, new_aj - aj);
            let b1 = b - ei - y[i] * dai * k(i, i) - y[j] * daj * k(i, j);
            let b2 = b - ej - y[i] * dai * k(i, j) - y[j] * daj * k(j, j);
            b = if new_ai > 0.0 && new_ai < p.c {
                b1
            } else if new_aj > 0.0 && new_aj < p.c {
                b2
            } else {
                (b1 + b2) / 2.0
            };
            // dual change: Δ(Σα) − ½Δ(αᵀQα), with Q α available through fcache
            let (gi, gj) = (y[i] * fcache[i], y[j] * fcache[j]);
            let qii = k(i, i);
            let qjj = k(j, j);
            let qij = y[i] * y[j] * k(i, j);
            dual += dai + daj - (dai * gi + daj * gj) - 0.5 * (dai * dai * qii + daj * daj * qjj + 2.0 * dai * daj * qij);
            alpha[i] = new_ai;
            alpha[j] = new_aj;
            for (t, f) in fcache.iter_mut().enumerate() {
                *f += y[i] * dai * k(i, t) + y[j] * daj * k(j, t);
            }
            trace.push(dual);
            changed += 1;
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }
    SmoSolution { alpha, bias: b, converged: passes >= p.max_passes, dual_trace: trace }
}

/// RBF-kernel SVM on standardized rows with 0/1 labels.
pub fn fit_svm_rbf(x: &Matrix, y: &[f64], params: &SvmParams) -> Result<SvmModel, ModelError> {
    crate::error::check_xy(x.nrows(), y)?;
    check_binary(y)?;
    if !x.is_standardized() {
        return Err(ModelError::NotStandardized);
    }
    if !(params.c > 0.0) {
        return Err(ModelError::InvalidParam(format!("C={} must be positive", params.c)));
    }
    let gamma = params.gamma.unwrap_or(1.0 / x.ncols().max(1) as f64);
    if !(gamma > 0.0) {
        return Err(ModelError::InvalidParam(format!("gamma={gamma} must be positive")));
    }
    let ypm: Vec<f64> = y.iter().map(|&v| if v == 1.0 { 1.0 } else { -1.0 }).collect();
    let kernel = rbf_kernel_matrix(x, gamma);
    let sol = smo(&kernel, &ypm, params);
    let mut support = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(x.row(i).to_vec());
            dual_coef.push(a * ypm[i]);
        }
    }
    Ok(SvmModel { support, dual_coef, bias: sol.bias, gamma, c: params.c, converged: sol.converged, dual_trace: sol.dual_trace })
}
