use serde::{Deserialize, Serialize};

use super::cart::{check_tree_inputs, fit_cart, Criterion, DecisionTree, MaxFeatures, TreeParams};
use crate::error::{check_binary, ModelError};
use crate::linalg::Matrix;
use crate::linear::sigmoid;
use crate::mlcore::Predict;
use crate::rng::{derive_seed, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { n_rounds: 100, learning_rate: 0.1, max_depth: 3, min_samples_split: 2, seed: DEFAULT_SEED }
    }
}

/// Boosted regression trees on the logistic loss. Leaf values hold the
/// Newton step, so `F(x) = f0 + lr · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub f0: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
    pub params: GbdtParams,
    /// Mean training log-loss after each round.
    pub train_log_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.f0 + self.learning_rate * self.trees.iter().map(|t| t.predict_value(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| sigmoid(self.raw_score(r))).collect()
    }
}

impl Predict for GbdtModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.predict_proba(x).into_iter().map(|p| f64::from(u8::from(p >= 0.5))).collect()
    }
}

fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    // log(1+e^f) - y f, computed stably
    y.iter().zip(f).map(|(&yi, &fi)| fi.max(0.0) + (-fi.abs()).exp().ln_1p() - yi * fi).sum::<f64>() / y.len() as f64
}

pub fn fit_gbdt(x: &Matrix, y: &[f64], params: &GbdtParams) -> Result<GbdtModel, ModelError> {
    check_tree_inputs(x, y, Criterion::Gini)?;
    let (neg, pos) = check_binary(y)?;
    if params.n_rounds == 0 {
        return Err(ModelError::InvalidParam("n_rounds must be at least 1".into()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(ModelError::InvalidParam(format!("learning_rate {}", params.learning_rate)));
    }
    let p = pos as f64 / (pos + neg) as f64;
    let f0 = (p / (1.0 - p)).ln();
    let mut f = vec![f0; y.len()];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut losses = Vec::with_capacity(params.n_rounds);
    for round in 0..params.n_rounds {
        let prob: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let resid: Vec<f64> = y.iter().zip(&prob).map(|(a, b)| a - b).collect();
        let tp = TreeParams {
            criterion: Criterion::Variance,
            max_depth: Some(params.max_depth),
            min_samples_split: params.min_samples_split,
            max_features: MaxFeatures::All,
            seed: derive_seed(params.seed, round as u64),
        };
        let mut tree = fit_cart(x, &resid, &tp)?;
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        let leaves: Vec<usize> = x.rows_iter().map(|r| tree.leaf_index(r)).collect();
        for (i, &l) in leaves.iter().enumerate() {
            num[l] += resid[i];
            den[l] += prob[i] * (1.0 - prob[i]);
        }
        for (k, node) in tree.nodes.iter_mut().enumerate() {
            if node.is_leaf() {
                node.value = if den[k] > 1e-12 { num[k] / den[k] } else { 0.0 };
            }
        }
        for (fi, &l) in f.iter_mut().zip(&leaves) {
            *fi += params.learning_rate * tree.nodes[l].value;
        }
        losses.push(log_loss(y, &f));
        trees.push(tree);
    }
    Ok(GbdtModel { f0, learning_rate: params.learning_rate, trees, params: *params, train_log_loss: losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn null_model_predicts_prevalence() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0], [5.0]]);
        let y = [1.0, 0.0, 1.0, 1.0, 0.0];
        let m = fit_gbdt(&x, &y, &GbdtParams { n_rounds: 1, max_depth: 0, ..Default::default() }).unwrap();
        for p in m.predict_proba(&x) {
            assert!((p - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decreases_every_round() {
        let mut rng = crate::rng::seeded(3);
        let rows: Vec<[f64; 2]> = (0..80).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] * r[1] + 0.2 * rng.random_range(-1.0..1.0) > 0.0))).collect();
        let m = fit_gbdt(&Matrix::from_rows(&rows), &y, &GbdtParams { n_rounds: 30, learning_rate: 0.3, max_depth: 2, ..Default::default() }).unwrap();
        assert!(m.train_log_loss.windows(2).all(|w| w[1] < w[0]), "{:?}", m.train_log_loss);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]);
        assert_eq!(fit_gbdt(&x, &[0.0, 0.0], &GbdtParams::default()).unwrap_err(), ModelError::SingleClass);
    }

    /// Brute-force stagewise computation for one feature and depth-1 stumps.
    fn hand_oracle(x: &[f64], y: &[f64], rounds: usize, lr: f64) -> Vec<f64> {
        let n = x.len();
        let p0 = y.iter().sum::<f64>() / n as f64;
        let mut f = vec![(p0 / (1.0 - p0)).ln(); n];
        for _ in 0..rounds {
            let p: Vec<f64> = f.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
            let r: Vec<f64> = (0..n).map(|i| y[i] - p[i]).collect();
            let sse = |idx: &[usize]| {
                let m = idx.iter().map(|&i| r[i]).sum::<f64>() / idx.len() as f64;
                idx.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>()
            };
            let mut sorted = x.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let mut best = (f64::INFINITY, 0.0);
            for w in sorted.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let l: Vec<usize> = (0..n).filter(|&i| x[i] <= t).collect();
                let rr: Vec<usize> = (0..n).filter(|&i| x[i] > t).collect();
                let s = sse(&l) + sse(&rr);
                if s < best.0 - 1e-15 {
                    best = (s, t);
                }
            }
            let t = best.1;
            let newton = |side: &dyn Fn(f64) -> bool| {
                let idx: Vec<usize> = (0..n).filter(|&i| side(x[i])).collect();
                idx.iter().map(|&i| r[i]).sum::<f64>() / idx.iter().map(|&i| p[i] * (1.0 - p[i])).sum::<f64>()
            };
            let (vl, vr) = (newton(&|v| v <= t), newton(&|v| v > t));
            for i in 0..n {
                f[i] += lr * if x[i] <= t { vl } else { vr };
            }
        }
        f.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect()
    }

    #[test]
    fn eight_point_instance_matches_hand_oracle() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let x = Matrix::from_rows(&xs.iter().map(|v| [*v]).collect::<Vec<_>>());
        let m = fit_gbdt(&x, &y, &GbdtParams { n_rounds: 2, learning_rate: 0.1, max_depth: 1, ..Default::default() }).unwrap();
        // round one: split at 3.5, Newton leaves -1.5/0.75 = -2 and 1.5/1.25 = 1.2
        let s = m.trees[0].nodes[0].split.unwrap();
        assert_eq!(s.threshold, 3.5);
        assert!((m.trees[0].nodes[s.left].value + 2.0).abs() < 1e-12);
        assert!((m.trees[0].nodes[s.right].value - 1.2).abs() < 1e-12);
        let oracle = hand_oracle(&xs, &y, 2, 0.1);
        for (a, b) in m.predict_proba(&x).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
