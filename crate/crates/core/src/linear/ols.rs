use super::{check_finite, FitDiagnostics, LinearFamily, LinearModel};
use crate::error::ModelError;
use crate::linalg::{cholesky_in_place, cholesky_solve_factored, dot, Matrix};
use crate::mlcore::{ParamValue, Params};

/// Smallest accepted `L_jj² / A_jj`; below this the system is treated as singular.
const PIVOT_RATIO: f64 = 1e-10;
const JITTER: f64 = 1e-8;

/// Centered Gram matrix `XcᵀXc` and `Xcᵀyc`, plus the column and target means.
fn centered_normal_equations(x: &Matrix, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let d = x.ncols();
    let xm = x.column_means();
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut c = vec![0.0; d];
    for (row, &yi) in x.rows_iter().zip(y) {
        for j in 0..d {
            c[j] = row[j] - xm[j];
        }
        let yc = yi - ym;
        for j in 0..d {
            b[j] += c[j] * yc;
            let cj = c[j];
            let arow = &mut a[j * d..j * d + j + 1];
            for (k, slot) in arow.iter_mut().enumerate() {
                *slot += cj * c[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[k * d + j] = a[j * d + k];
        }
    }
    (a, b, xm, ym)
}

fn factor(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if !cholesky_in_place(&mut l, d) {
        return None;
    }
    let ok = (0..d).all(|j| {
        let ajj = a[j * d + j];
        ajj <= 0.0 || l[j * d + j] * l[j * d + j] >= PIVOT_RATIO * ajj
    });
    ok.then_some(l)
}

/// Solves `(A + λI) w = b`, retrying once with a diagonal jitter scaled to
/// the mean diagonal.
fn solve_penalized(mut a: Vec<f64>, b: &[f64], d: usize, lambda: f64) -> Result<(Vec<f64>, bool), ModelError> {
    for j in 0..d {
        a[j * d + j] += lambda;
    }
    if let Some(l) = factor(&a, d) {
        return Ok((cholesky_solve_factored(&l, d, b), false));
    }
    let mean_diag = (0..d).map(|j| a[j * d + j]).sum::<f64>() / d.max(1) as f64;
    let eps = JITTER * mean_diag.max(1.0);
    for j in 0..d {
        a[j * d + j] += eps;
    }
    match factor(&a, d) {
        Some(l) => Ok((cholesky_solve_factored(&l, d, b), true)),
        None => Err(ModelError::NumericalFailure("normal equations singular after jitter".into())),
    }
}

fn fit_least_squares(x: &Matrix, y: &[f64], lambda: f64, family: LinearFamily) -> Result<LinearModel, ModelError> {
    check_finite(x, y)?;
    let d = x.ncols();
    let (a, b, xm, ym) = centered_normal_equations(x, y);
    let (weights, jittered) = if d == 0 { (Vec::new(), false) } else { solve_penalized(a, &b, d, lambda)? };
    let intercept = ym - dot(&weights, &xm);
    if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
        return Err(ModelError::NumericalFailure("non-finite solution".into()));
    }
    let mut hyperparams = Params::new();
    if family == LinearFamily::Ridge {
        hyperparams.insert("lambda".into(), ParamValue::Float(lambda));
    }
    Ok(LinearModel {
        family,
        weights,
        intercept,
        hyperparams,
        diagnostics: FitDiagnostics { jittered, converged: true, iterations: 1, objective_trace: Vec::new() },
    })
}

/// Ordinary least squares with intercept.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel, ModelError> {
    fit_least_squares(x, y, 0.0, LinearFamily::Ols)
}

/// Ridge regression; the intercept is not penalized.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel, ModelError> {
    if !(lambda >= 0.0) {
        return Err(ModelError::NegativeLambda(lambda));
    }
    fit_least_squares(x, y, lambda, LinearFamily::Ridge)
}
