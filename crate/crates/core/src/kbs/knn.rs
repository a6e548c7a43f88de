use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{sq_dist, Matrix};
use crate::mlcore::Predict;

/// Stored standardized training rows for Euclidean k-NN voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "KnnData", try_from = "KnnData")]
pub struct KnnIndex {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub k: usize,
}

impl KnnIndex {
    pub fn new(x: Matrix, y: Vec<f64>, k: usize) -> Result<Self, ModelError> {
        crate::error::check_xy(x.nrows(), &y)?;
        if !x.is_standardized() {
            return Err(ModelError::NotStandardized);
        }
        if k == 0 || k > y.len() {
            return Err(ModelError::InvalidParam(format!("k={k} must lie in 1..={}", y.len())));
        }
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(ModelError::InvalidParam(format!("label {v} is not 0 or 1")));
        }
        Ok(Self { x, y, k })
    }

    /// Indices of the `k` nearest training rows; equal distances prefer the
    /// lower row index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.x.rows_iter().enumerate().map(|(i, r)| (sq_dist(r, q), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Fraction of positive neighbours for each query row.
    pub fn scores(&self, q: &Matrix) -> Result<Vec<f64>, ModelError> {
        if q.ncols() != self.x.ncols() {
            return Err(ModelError::DimensionMismatch { expected: self.x.ncols(), got: q.ncols() });
        }
        Ok(crate::par::map_indexed(q.nrows(), |i| {
            let nb = self.neighbors(q.row(i));
            nb.iter().map(|&j| self.y[j]).sum::<f64>() / nb.len() as f64
        }))
    }

    /// Majority labels and vote scores; a tied vote goes to label 1.
    pub fn classify(&self, q: &Matrix) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let s = self.scores(q)?;
        Ok((s.iter().map(|&v| f64::from(u8::from(v >= 0.5))).collect(), s))
    }
}

#[derive(Serialize, Deserialize)]
struct KnnData {
    k: usize,
    labels: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl From<KnnIndex> for KnnData {
    fn from(i: KnnIndex) -> Self {
        Self { k: i.k, rows: i.x.rows_iter().map(<[f64]>::to_vec).collect(), labels: i.y }
    }
}

impl TryFrom<KnnData> for KnnIndex {
    type Error = ModelError;
    fn try_from(d: KnnData) -> Result<Self, ModelError> {
        let width = d.rows.first().map_or(0, Vec::len);
        if d.rows.iter().any(|r| r.len() != width) {
            return Err(ModelError::InvalidParam("ragged stored rows".into()));
        }
        KnnIndex::new(Matrix::from_rows(&d.rows).into_standardized(), d.labels, d.k)
    }
}

impl Predict for KnnIndex {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.classify(x).map(|(l, _)| l).unwrap_or_else(|_| vec![f64::NAN; x.nrows()])
    }
}
