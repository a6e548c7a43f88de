use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::mlcore::Predict;
use crate::rng::{seeded, Rng, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Variance,
    Gini,
    Entropy,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Variance => "variance",
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "variance" | "squared_error" | "mse" => Some(Criterion::Variance),
            "gini" => Some(Criterion::Gini),
            "entropy" => Some(Criterion::Entropy),
            _ => None,
        }
    }

    pub fn is_classification(self) -> bool {
        self != Criterion::Variance
    }

    /// Weighted impurity sum of a node from `Σw`, `Σwy`, `Σwy²`.
    fn impurity(self, w: f64, wy: f64, wy2: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Variance => (wy2 - wy * wy / w).max(0.0),
            Criterion::Gini => {
                let p = (wy / w).clamp(0.0, 1.0);
                w * 2.0 * p * (1.0 - p)
            }
            Criterion::Entropy => {
                let p = (wy / w).clamp(0.0, 1.0);
                let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
                w * (h(p) + h(1.0 - p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    /// Features examined per node out of `d`; fractional counts round up.
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Log2 => (d as f64).log2().ceil() as usize,
            MaxFeatures::Count(c) => c,
        };
        k.clamp(1, d.max(1))
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" | "none" => Some(MaxFeatures::All),
            "sqrt" => Some(MaxFeatures::Sqrt),
            "log2" => Some(MaxFeatures::Log2),
            _ => s.parse().ok().map(MaxFeatures::Count),
        }
    }

    pub fn as_string(self) -> String {
        match self {
            MaxFeatures::All => "all".into(),
            MaxFeatures::Sqrt => "sqrt".into(),
            MaxFeatures::Log2 => "log2".into(),
            MaxFeatures::Count(c) => c.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { criterion: Criterion::Variance, max_depth: None, min_samples_split: 2, max_features: MaxFeatures::All, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub split: Option<Split>,
    /// Weighted mean target; for classifiers the probability of class 1.
    pub value: f64,
    pub n_samples: usize,
    pub weight: f64,
    /// Weighted impurity sum of the node.
    pub impurity: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// (P(class 0), P(class 1)) for classification leaves.
    pub fn class_probabilities(&self) -> (f64, f64) {
        (1.0 - self.value, self.value)
    }
}

/// Binary tree stored in an arena; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub criterion: Criterion,
}

impl DecisionTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    /// Leaf value: a regression estimate or the probability of class 1.
    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value
    }

    pub fn predict_values(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.predict_value(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Checks the arena structure: children exist, are visited once, and
    /// sample counts add up.
    pub fn check_structure(&self) -> Result<(), String> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(format!("node {i} missing or shared"));
            }
            seen[i] = true;
            if let Some(s) = &self.nodes[i].split {
                let (l, r) = (s.left, s.right);
                if l >= self.nodes.len() || r >= self.nodes.len() {
                    return Err(format!("node {i} has dangling children"));
                }
                if self.nodes[l].n_samples + self.nodes[r].n_samples != self.nodes[i].n_samples {
                    return Err(format!("node {i} sample counts do not add up"));
                }
                stack.push(l);
                stack.push(r);
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err("unreachable nodes".into())
        }
    }
}

impl Predict for DecisionTree {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        let v = self.predict_values(x);
        if self.criterion.is_classification() {
            v.into_iter().map(|p| f64::from(u8::from(p >= 0.5))).collect()
        } else {
            v
        }
    }
}

pub(crate) fn check_tree_inputs(x: &Matrix, y: &[f64], criterion: Criterion) -> Result<(), ModelError> {
    crate::error::check_xy(x.nrows(), y)?;
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::NumericalFailure("non-finite input".into()));
    }
    if criterion.is_classification() {
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(ModelError::InvalidParam(format!("label {v} is not 0 or 1")));
        }
    }
    Ok(())
}

/// Fits a CART tree on all rows with unit weights.
pub fn fit_cart(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<DecisionTree, ModelError> {
    let samples: Vec<usize> = (0..y.len()).collect();
    fit_cart_weighted(x, y, &samples, &vec![1.0; y.len()], params)
}

/// Fits a CART tree on `samples` (row indices, repeats allowed) with per-row
/// weights.
pub fn fit_cart_weighted(x: &Matrix, y: &[f64], samples: &[usize], weights: &[f64], params: &TreeParams) -> Result<DecisionTree, ModelError> {
    check_tree_inputs(x, y, params.criterion)?;
    if samples.is_empty() {
        return Err(ModelError::EmptyData);
    }
    if params.min_samples_split < 2 {
        return Err(ModelError::InvalidParam("min_samples_split must be at least 2".into()));
    }
    let (n, d) = (x.nrows(), x.ncols());
    let mut cols = vec![0.0; n * d];
    for (i, r) in x.rows_iter().enumerate() {
        for j in 0..d {
            cols[j * n + i] = r[j];
        }
    }
    let mut b = Builder {
        cols: &cols,
        n,
        d,
        y,
        w: weights,
        params,
        k: params.max_features.resolve(d),
        rng: seeded(params.seed),
        nodes: Vec::new(),
        order: Vec::with_capacity(samples.len()),
    };
    let mut s = samples.to_vec();
    b.build(&mut s, 0);
    Ok(DecisionTree { nodes: b.nodes, n_features: d, criterion: params.criterion })
}

struct Builder<'a> {
    cols: &'a [f64],
    n: usize,
    d: usize,
    y: &'a [f64],
    w: &'a [f64],
    params: &'a TreeParams,
    k: usize,
    rng: Rng,
    nodes: Vec<TreeNode>,
    order: Vec<usize>,
}

struct Best {
    feature: usize,
    threshold: f64,
    children: f64,
}

impl Builder<'_> {
    fn build(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let (mut w, mut wy, mut wy2) = (0.0, 0.0, 0.0);
        for &i in samples.iter() {
            let (wi, yi) = (self.w[i], self.y[i]);
            w += wi;
            wy += wi * yi;
            wy2 += wi * yi * yi;
        }
        let crit = self.params.criterion;
        let impurity = crit.impurity(w, wy, wy2);
        let id = self.nodes.len();
        self.nodes.push(TreeNode { split: None, value: if w > 0.0 { wy / w } else { 0.0 }, n_samples: samples.len(), weight: w, impurity });

        let first = self.y[samples[0]];
        let pure = samples.iter().all(|&i| self.y[i] == first);
        if pure || samples.len() < self.params.min_samples_split || self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some(best) = self.best_split(samples, impurity) else { return id };
        let col = &self.cols[best.feature * self.n..(best.feature + 1) * self.n];
        let mut lo = 0;
        for k in 0..samples.len() {
            if col[samples[k]] <= best.threshold {
                samples.swap(lo, k);
                lo += 1;
            }
        }
        let (l, r) = samples.split_at_mut(lo);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id].split = Some(Split { feature: best.feature, threshold: best.threshold, left, right });
        id
    }

    fn best_split(&mut self, samples: &[usize], parent: f64) -> Option<Best> {
        let mut features: Vec<usize> =
            if self.k >= self.d { (0..self.d).collect() } else { sample(&mut self.rng, self.d, self.k).into_vec() };
        features.sort_unstable();
        let crit = self.params.criterion;
        let (tw, twy, twy2) = samples.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &i| {
            let (wi, yi) = (self.w[i], self.y[i]);
            (a + wi, b + wi * yi, c + wi * yi * yi)
        });
        let mut best: Option<Best> = None;
        for f in features {
            let col = &self.cols[f * self.n..(f + 1) * self.n];
            self.order.clear();
            self.order.extend_from_slice(samples);
            self.order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let (mut lw, mut lwy, mut lwy2) = (0.0, 0.0, 0.0);
            for k in 0..self.order.len() - 1 {
                let i = self.order[k];
                let (wi, yi) = (self.w[i], self.y[i]);
                lw += wi;
                lwy += wi * yi;
                lwy2 += wi * yi * yi;
                let (a, b) = (col[i], col[self.order[k + 1]]);
                if a == b {
                    continue;
                }
                let children = crit.impurity(lw, lwy, lwy2) + crit.impurity(tw - lw, twy - lwy, twy2 - lwy2);
                if best.as_ref().is_none_or(|bst| children < bst.children) {
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some(Best { feature: f, threshold: t, children });
                }
            }
        }
        best.filter(|b| parent - b.children > 1e-12 * parent.max(f64::MIN_POSITIVE))
    }
}
