use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cart::{check_tree_inputs, fit_cart_weighted, Criterion, DecisionTree, MaxFeatures, TreeParams};
use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::mlcore::{ClassWeight, Predict};
use crate::rng::{derive_seed, seeded, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub class_weight: ClassWeight,
    pub bootstrap: bool,
    /// Compute an out-of-bag estimate (accuracy or MSE) after fitting.
    pub oob_score: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            criterion: Criterion::Variance,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
            class_weight: ClassWeight::None,
            bootstrap: true,
            oob_score: false,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub tree_seeds: Vec<u64>,
    pub params: ForestParams,
    pub oob_estimate: Option<f64>,
}

impl ForestModel {
    /// Mean of tree leaf values: regression estimate or P(class 1).
    pub fn predict_values(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.rows_iter().map(|r| self.trees.iter().map(|t| t.predict_value(r)).sum::<f64>() / k).collect()
    }

    pub fn is_classifier(&self) -> bool {
        self.params.criterion.is_classification()
    }
}

impl Predict for ForestModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        let v = self.predict_values(x);
        if self.is_classifier() {
            v.into_iter().map(|p| f64::from(u8::from(p >= 0.5))).collect()
        } else {
            v
        }
    }
}

fn bootstrap_draw(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bagged CART ensemble. Tree `t` uses seed `derive_seed(seed, t)`; its
/// bootstrap sample comes from a second stream derived from that seed.
pub fn fit_random_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel, ModelError> {
    if params.n_estimators == 0 {
        return Err(ModelError::InvalidParam("n_estimators must be at least 1".into()));
    }
    check_tree_inputs(x, y, params.criterion)?;
    let n = y.len();
    let weights = if params.criterion.is_classification() { params.class_weight.sample_weights(y) } else { vec![1.0; n] };
    let seeds: Vec<u64> = (0..params.n_estimators as u64).map(|t| derive_seed(params.seed, t)).collect();
    let fitted: Vec<Result<(DecisionTree, Vec<usize>), ModelError>> = crate::par::map_indexed(seeds.len(), |t| {
        let samples = if params.bootstrap { bootstrap_draw(n, derive_seed(seeds[t], 1)) } else { (0..n).collect() };
        let tp = TreeParams {
            criterion: params.criterion,
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: params.max_features,
            seed: seeds[t],
        };
        fit_cart_weighted(x, y, &samples, &weights, &tp).map(|tree| (tree, samples))
    });
    let mut trees = Vec::with_capacity(seeds.len());
    let mut draws = Vec::with_capacity(seeds.len());
    for f in fitted {
        let (t, s) = f?;
        trees.push(t);
        draws.push(s);
    }
    let oob_estimate = (params.oob_score && params.bootstrap).then(|| oob(x, y, &trees, &draws, params.criterion.is_classification())).flatten();
    Ok(ForestModel { trees, tree_seeds: seeds, params: *params, oob_estimate })
}

fn oob(x: &Matrix, y: &[f64], trees: &[DecisionTree], draws: &[Vec<usize>], classify: bool) -> Option<f64> {
    let n = y.len();
    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for (t, d) in trees.iter().zip(draws) {
        let mut inbag = vec![false; n];
        d.iter().for_each(|&i| inbag[i] = true);
        for i in (0..n).filter(|&i| !inbag[i]) {
            sum[i] += t.predict_value(x.row(i));
            cnt[i] += 1;
        }
    }
    let scored: Vec<(f64, f64)> = (0..n).filter(|&i| cnt[i] > 0).map(|i| (sum[i] / cnt[i] as f64, y[i])).collect();
    if scored.is_empty() {
        return None;
    }
    let m = scored.len() as f64;
    Some(if classify {
        scored.iter().filter(|(p, t)| f64::from(u8::from(*p >= 0.5)) == *t).count() as f64 / m
    } else {
        scored.iter().map(|(p, t)| (p - t).powi(2)).sum::<f64>() / m
    })
}
