use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, regression_metrics};
use super::GridError;
use crate::error::ModelError;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

pub fn format_params(p: &Params) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Reads a float parameter, falling back to `default` when absent.
pub fn param_f64(p: &Params, name: &str, default: f64) -> Result<f64, ModelError> {
    match p.get(name) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| ModelError::InvalidParam(format!("{name}={v} is not a number"))),
    }
}

pub fn param_usize(p: &Params, name: &str, default: usize) -> Result<usize, ModelError> {
    match p.get(name) {
        None => Ok(default),
        Some(v) => v.as_usize().ok_or_else(|| ModelError::InvalidParam(format!("{name}={v} is not a non-negative integer"))),
    }
}

/// Named axes in declaration order. Combinations enumerate with the first
/// axis varying slowest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(mut self, name: &str, values: impl IntoIterator<Item = ParamValue>) -> Self {
        self.axes.push((name.to_string(), values.into_iter().collect()));
        self
    }

    pub fn combinations(&self) -> Vec<Params> {
        if self.axes.iter().any(|(_, v)| v.is_empty()) {
            return Vec::new();
        }
        let mut out = vec![Params::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Validation metric, oriented so that higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NegMse,
    Accuracy,
    F1,
}

impl Metric {
    pub fn score(self, y_true: &[f64], y_pred: &[f64]) -> Result<f64, GridError> {
        Ok(match self {
            Metric::NegMse => -regression_metrics(y_true, y_pred)?.mse,
            Metric::Accuracy => classification_metrics(y_true, y_pred)?.accuracy,
            Metric::F1 => classification_metrics(y_true, y_pred)?.f1,
        })
    }
}

/// Something that maps feature rows to predictions (values for regressors,
/// 0/1 labels for classifiers).
pub trait Predict {
    fn predict(&self, x: &Matrix) -> Vec<f64>;
}

/// A trainable model family with named hyperparameters.
pub trait ModelFamily: Sync {
    type Model: Predict + Send;
    fn fit(&self, params: &Params, x: &Matrix, y: &[f64]) -> Result<Self::Model, ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FoldScheme {
    /// Consecutive date-ordered blocks.
    Contiguous,
    Shuffled { seed: u64 },
}

/// `k` consecutive blocks covering `0..n`, sizes differing by at most one
/// (the first `n % k` blocks are one longer).
pub fn contiguous_folds(n: usize, k: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Validation index sets for each fold.
pub fn fold_indices(n: usize, k: usize, scheme: FoldScheme) -> Vec<Vec<usize>> {
    match scheme {
        FoldScheme::Contiguous => contiguous_folds(n, k).into_iter().map(|r| r.collect()).collect(),
        FoldScheme::Shuffled { seed } => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut crate::rng::seeded(seed));
            contiguous_folds(n, k)
                .into_iter()
                .map(|r| {
                    let mut v = idx[r].to_vec();
                    v.sort_unstable();
                    v
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: Params,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    /// Fit failure in any fold; the row then scores -inf.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_params: Params,
    pub best_index: usize,
    pub metric: Metric,
    pub cv_table: Vec<CvRow>,
}

impl GridSearchResult {
    pub fn to_csv(&self) -> String {
        let k = self.cv_table.first().map_or(0, |r| r.fold_scores.len());
        let mut s = String::from("params");
        for i in 0..k {
            s.push_str(&format!(",fold_{i}"));
        }
        s.push_str(",mean,error\n");
        for r in &self.cv_table {
            s.push_str(&format_params(&r.params));
            for v in &r.fold_scores {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{},{}\n", r.mean_score, r.error.as_deref().unwrap_or("")));
        }
        s
    }
}

pub const MIN_FOLD_ROWS: usize = 2;

/// Scores every grid cell by k-fold cross-validation, picks the highest mean
/// (earliest cell on ties) and refits it on all rows.
pub fn cross_validated_grid_search<F: ModelFamily>(
    family: &F,
    grid: &ParamGrid,
    x: &Matrix,
    y: &[f64],
    k: usize,
    metric: Metric,
    scheme: FoldScheme,
) -> Result<(GridSearchResult, F::Model), GridError> {
    let cells = grid.combinations();
    if cells.is_empty() {
        return Err(GridError::EmptyGrid);
    }
    if k < 2 {
        return Err(GridError::InvalidK(k));
    }
    if x.nrows() != y.len() {
        return Err(GridError::Model(ModelError::DimensionMismatch { expected: x.nrows(), got: y.len() }));
    }
    let n = y.len();
    if n / k < MIN_FOLD_ROWS {
        return Err(GridError::FoldTooSmall { rows: n, k });
    }
    let folds = fold_indices(n, k, scheme);
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .map(|val| {
            let mut in_val = vec![false; n];
            val.iter().for_each(|&i| in_val[i] = true);
            ((0..n).filter(|&i| !in_val[i]).collect(), val)
        })
        .collect();

    let results: Vec<Result<f64, String>> = crate::par::map_indexed(cells.len() * k, |job| {
        let (cell, fold) = (job / k, job % k);
        let (train, val) = &splits[fold];
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let yval: Vec<f64> = val.iter().map(|&i| y[i]).collect();
        let model = family.fit(&cells[cell], &x.select_rows(train), &ytr).map_err(|e| e.to_string())?;
        let pred = model.predict(&x.select_rows(val));
        metric.score(&yval, &pred).map_err(|e| e.to_string())
    });

    let mut table = Vec::with_capacity(cells.len());
    for (c, params) in cells.into_iter().enumerate() {
        let chunk = &results[c * k..(c + 1) * k];
        let error = chunk.iter().find_map(|r| r.as_ref().err().cloned());
        let fold_scores: Vec<f64> = chunk.iter().map(|r| *r.as_ref().unwrap_or(&f64::NEG_INFINITY)).collect();
        let mean_score = if error.is_some() { f64::NEG_INFINITY } else { fold_scores.iter().sum::<f64>() / k as f64 };
        table.push(CvRow { params, fold_scores, mean_score, error });
    }
    let mut best = 0;
    for (i, r) in table.iter().enumerate() {
        if r.mean_score > table[best].mean_score {
            best = i;
        }
    }
    if let Some(e) = &table[best].error {
        return Err(GridError::AllCellsFailed(e.clone()));
    }
    let model = family.fit(&table[best].params, x, y)?;
    Ok((GridSearchResult { best_params: table[best].params.clone(), best_index: best, metric, cv_table: table }, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Predicts `shrink * mean(y_train)` for every row.
    struct Shrunk;
    struct Const(f64);

    impl Predict for Const {
        fn predict(&self, x: &Matrix) -> Vec<f64> {
            vec![self.0; x.nrows()]
        }
    }

    impl ModelFamily for Shrunk {
        type Model = Const;
        fn fit(&self, p: &Params, _x: &Matrix, y: &[f64]) -> Result<Const, ModelError> {
            let s = param_f64(p, "shrink", 1.0)?;
            if s < 0.0 {
                return Err(ModelError::InvalidParam("shrink".into()));
            }
            Ok(Const(s * y.iter().sum::<f64>() / y.len() as f64))
        }
    }

    fn data(n: usize) -> (Matrix, Vec<f64>) {
        (Matrix::zeros(n, 1), (0..n).map(|i| 5.0 + (i % 3) as f64).collect())
    }

    #[test]
    fn combinations_order() {
        let g = ParamGrid::new().axis("a", [1i64.into(), 2i64.into()]).axis("b", ["x".into(), "y".into()]);
        let c: Vec<String> = g.combinations().iter().map(format_params).collect();
        assert_eq!(c, ["a=1 b=x", "a=1 b=y", "a=2 b=x", "a=2 b=y"]);
        assert!(ParamGrid::new().axis("a", []).combinations().is_empty());
    }

    #[test]
    fn single_cell_grid() {
        let (x, y) = data(20);
        let g = ParamGrid::new().axis("shrink", [0.5.into()]);
        let (r, m) = cross_validated_grid_search(&Shrunk, &g, &x, &y, 4, Metric::NegMse, FoldScheme::Contiguous).unwrap();
        assert_eq!(r.best_params["shrink"], ParamValue::Float(0.5));
        assert_eq!(r.cv_table.len(), 1);
        assert_eq!(r.cv_table[0].fold_scores.len(), 4);
        assert!((m.0 - 0.5 * y.iter().sum::<f64>() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_cell_wins_and_ties_go_early() {
        let (x, y) = data(30);
        let g = ParamGrid::new().axis("shrink", [0.0.into(), 1.0.into(), 1.0.into(), (-1.0).into()]);
        let (r, _) = cross_validated_grid_search(&Shrunk, &g, &x, &y, 3, Metric::NegMse, FoldScheme::Contiguous).unwrap();
        assert_eq!(r.best_index, 1);
        for f in 0..3 {
            assert!(r.cv_table[1].fold_scores[f] > r.cv_table[0].fold_scores[f]);
        }
        assert!(r.cv_table[3].error.is_some());
        assert_eq!(r.cv_table[3].mean_score, f64::NEG_INFINITY);
    }

    #[test]
    fn argument_errors() {
        let (x, y) = data(5);
        let g = ParamGrid::new().axis("shrink", [1.0.into()]);
        assert!(matches!(cross_validated_grid_search(&Shrunk, &ParamGrid::new().axis("s", []), &x, &y, 2, Metric::NegMse, FoldScheme::Contiguous), Err(GridError::EmptyGrid)));
        assert!(matches!(cross_validated_grid_search(&Shrunk, &g, &x, &y, 3, Metric::NegMse, FoldScheme::Contiguous), Err(GridError::FoldTooSmall { .. })));
        assert!(matches!(cross_validated_grid_search(&Shrunk, &g, &x, &y, 1, Metric::NegMse, FoldScheme::Contiguous), Err(GridError::InvalidK(1))));
    }

    proptest! {
        #[test]
        fn folds_partition(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let f = contiguous_folds(n, k);
            prop_assert_eq!(f.len(), k);
            prop_assert_eq!(f[0].start, 0);
            prop_assert_eq!(f[k - 1].end, n);
            prop_assert!(f.windows(2).all(|w| w[0].end == w[1].start));
            let lens: Vec<usize> = f.iter().map(|r| r.len()).collect();
            prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = fold_indices(n, k, FoldScheme::Shuffled { seed }).concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
