use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_binary, ModelError};
use crate::linalg::Matrix;
use crate::mlcore::Predict;

pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes for labels 0/1. Index 0 of each array is class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Per-class variances including the smoothing term.
    pub variances: [Vec<f64>; 2],
    pub epsilon: f64,
}

/// Fits per-class means and variances; `ε = var_smoothing · max feature
/// variance` is added to every variance.
pub fn fit_gaussian_nb(x: &Matrix, y: &[f64], var_smoothing: f64) -> Result<GnbModel, ModelError> {
    crate::error::check_xy(x.nrows(), y)?;
    let (neg, pos) = check_binary(y)?;
    let d = x.ncols();
    let all_var = x.column_means().iter().enumerate().map(|(j, mu)| x.rows_iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / x.nrows() as f64).fold(0.0, f64::max);
    let epsilon = if all_var > 0.0 { var_smoothing * all_var } else { var_smoothing.max(f64::MIN_POSITIVE) };
    let counts = [neg as f64, pos as f64];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    for (r, &yi) in x.rows_iter().zip(y) {
        let c = yi as usize;
        for (m, v) in means[c].iter_mut().zip(r) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for (r, &yi) in x.rows_iter().zip(y) {
        let c = yi as usize;
        for j in 0..d {
            variances[c][j] += (r[j] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        variances[c].iter_mut().for_each(|v| *v = *v / counts[c] + epsilon);
    }
    let n = y.len() as f64;
    Ok(GnbModel { priors: [counts[0] / n, counts[1] / n], means, variances, epsilon })
}

impl GnbModel {
    fn log_joint(&self, row: &[f64], c: usize) -> f64 {
        let mut s = self.priors[c].ln();
        for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            s -= 0.5 * ((2.0 * PI * v).ln() + (x - m) * (x - m) / v);
        }
        s
    }

    /// Normalized class posteriors `[P(0|x), P(1|x)]`.
    pub fn posteriors(&self, row: &[f64]) -> [f64; 2] {
        let (a, b) = (self.log_joint(row, 0), self.log_joint(row, 1));
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        [ea / (ea + eb), eb / (ea + eb)]
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.posteriors(r)[1]).collect()
    }
}

impl Predict for GnbModel {
    /// Class 1 only when strictly more probable.
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter()
            .map(|r| {
                let p = self.posteriors(r);
                f64::from(u8::from(p[1] > p[0]))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn symmetric_blobs_split_at_midpoint() {
        let x = Matrix::from_rows(&[[-3.0, 0.0], [-1.0, 1.0], [-2.0, -1.0], [3.0, 0.0], [1.0, 1.0], [2.0, -1.0]]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = fit_gaussian_nb(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        let p = m.posteriors(&[0.0, 0.7]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        // exact tie goes to class 0
        assert_eq!(m.predict(&Matrix::from_rows(&[[0.0, 0.3]])), vec![0.0]);
        assert_eq!(m.predict(&Matrix::from_rows(&[[0.1, 0.0], [-0.1, 0.0]])), vec![1.0, 0.0]);
    }

    #[test]
    fn posteriors_sum_to_one() {
        let mut rng = crate::rng::seeded(1);
        let x = Matrix::from_vec(40, 3, (0..120).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<f64> = (0..40).map(|i| f64::from(u8::from(x.get(i, 0) > 0.0))).collect();
        let m = fit_gaussian_nb(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let p = m.posteriors(&q);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
        assert!((m.priors[0] + m.priors[1] - 1.0).abs() < 1e-15);
        assert!(m.variances.iter().flatten().all(|&v| v >= m.epsilon && m.epsilon > 0.0));
    }

    #[test]
    fn hand_instance() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0], [3.0, 3.0], [6.0, 5.0], [7.0, 7.0], [8.0, 6.0]]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = fit_gaussian_nb(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        // class 0: means (2, 2), variances (2/3, 2/3); class 1: means (7, 6), variances (2/3, 2/3)
        // largest column variance is the first column's, 41.5 / 6
        let eps = 1e-9 * (41.5f64 / 6.0);
        assert!((m.epsilon - eps).abs() < 1e-20);
        let v = 2.0 / 3.0 + eps;
        let dens = |x: f64, mu: f64| (-(x - mu) * (x - mu) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
        let q = [4.0, 4.0];
        let j0 = 0.5 * dens(q[0], 2.0) * dens(q[1], 2.0);
        let j1 = 0.5 * dens(q[0], 7.0) * dens(q[1], 6.0);
        let p = m.posteriors(&q);
        assert!((p[0] - j0 / (j0 + j1)).abs() < 1e-9);
        assert!((p[1] - j1 / (j0 + j1)).abs() < 1e-9);
    }

    #[test]
    fn affine_rescaling_invariance() {
        let mut rng = crate::rng::seeded(2);
        let x = Matrix::from_vec(30, 2, (0..60).map(|_| rng.random_range(-1.0..1.0)).collect());
        let y: Vec<f64> = (0..30).map(|i| f64::from(u8::from(x.get(i, 0) + x.get(i, 1) > 0.0))).collect();
        let (a, c) = ([3.0, 0.5], [10.0, -4.0]);
        let t = |m: &Matrix| Matrix::from_rows(&m.rows_iter().map(|r| [a[0] * r[0] + c[0], a[1] * r[1] + c[1]]).collect::<Vec<_>>());
        let m1 = fit_gaussian_nb(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        let m2 = fit_gaussian_nb(&t(&x), &y, DEFAULT_VAR_SMOOTHING).unwrap();
        let q = Matrix::from_vec(10, 2, (0..20).map(|_| rng.random_range(-2.0..2.0)).collect());
        for (p, r) in m1.predict_proba(&q).iter().zip(m2.predict_proba(&t(&q))) {
            assert!((p - r).abs() < 1e-6);
        }
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(fit_gaussian_nb(&Matrix::zeros(3, 1), &[0.0; 3], 1e-9).unwrap_err(), ModelError::SingleClass);
    }
}
