use super::{check_finite, FitDiagnostics, LinearFamily, LinearModel};
use crate::error::{check_binary, ModelError};
use crate::linalg::{dot, Matrix};
use crate::mlcore::{ClassWeight, ParamValue, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000 }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Objective `(1/n) Σ cᵢ [log(1+e^{zᵢ}) − yᵢ zᵢ] + (λ/2)‖w‖²` with
/// `zᵢ = w·xᵢ + b`, and its gradient `(∂w, ∂b)`.
pub fn logistic_objective(x: &Matrix, y: &[f64], sample_weights: &[f64], lambda: f64, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for ((row, &yi), &ci) in x.rows_iter().zip(y).zip(sample_weights) {
        let z = dot(w, row) + b;
        loss += ci * (softplus(z) - yi * z);
        let e = ci * (sigmoid(z) - yi);
        gb += e;
        for (g, xv) in gw.iter_mut().zip(row) {
            *g += e * xv;
        }
    }
    let penalty = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda * wj;
    }
    (loss / n + penalty, gw, gb / n)
}

/// L2-penalized logistic regression by full-batch gradient descent with
/// Armijo backtracking.
pub fn fit_logistic(x: &Matrix, y: &[f64], lambda: f64, class_weight: ClassWeight, opts: LogisticOptions) -> Result<LinearModel, ModelError> {
    if !(lambda >= 0.0) {
        return Err(ModelError::NegativeLambda(lambda));
    }
    check_finite(x, y)?;
    check_binary(y)?;
    let cw = class_weight.sample_weights(y);
    let d = x.ncols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut f, mut gw, mut gb) = logistic_objective(x, y, &cw, lambda, &w, b);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let grad_inf = |gw: &[f64], gb: f64| gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
    while iterations < opts.max_iter {
        if grad_inf(&gw, gb) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let g2 = gb * gb + gw.iter().map(|g| g * g).sum::<f64>();
        step *= 2.0;
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj - step * g).collect();
            let nb = b - step * gb;
            let (nf, ngw, ngb) = logistic_objective(x, y, &cw, lambda, &nw, nb);
            if nf <= f - 0.5 * step * g2 {
                (w, b, f, gw, gb) = (nw, nb, nf, ngw, ngb);
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no further decrease representable
                converged = grad_inf(&gw, gb) < opts.tol;
                iterations = opts.max_iter;
                break;
            }
        }
        trace.push(f);
    }
    if !converged && grad_inf(&gw, gb) < opts.tol {
        converged = true;
    }
    let mut hyperparams = Params::new();
    hyperparams.insert("lambda".into(), ParamValue::Float(lambda));
    hyperparams.insert("class_weight".into(), ParamValue::Str(class_weight.as_str().into()));
    Ok(LinearModel {
        family: LinearFamily::Logistic,
        weights: w,
        intercept: b,
        hyperparams,
        diagnostics: FitDiagnostics { jittered: false, converged, iterations, objective_trace: trace },
    })
}
