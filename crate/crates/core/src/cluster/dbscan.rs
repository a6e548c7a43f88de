use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{max_second_difference, ClusterError};
use crate::linalg::{sq_dist, Matrix};

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanResult {
    /// Cluster id per row, [`NOISE`] for noise.
    pub labels: Vec<i64>,
    pub core: Vec<bool>,
    pub eps: f64,
    pub min_pts: usize,
    pub n_clusters: usize,
}

impl DbscanResult {
    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// Rows within `eps` of each row, itself included.
fn neighborhoods(x: &Matrix, eps: f64) -> Vec<Vec<usize>> {
    let e2 = eps * eps;
    crate::par::map_indexed(x.nrows(), |i| (0..x.nrows()).filter(|&j| sq_dist(x.row(i), x.row(j)) <= e2).collect())
}

/// Density clustering. A row is core when at least `min_pts` rows (itself
/// included) lie within `eps`. Clusters grow breadth-first from unlabeled core
/// rows in row order; a border row joins the first cluster that reaches it.
pub fn fit_dbscan(x: &Matrix, eps: f64, min_pts: usize, cap: usize) -> Result<DbscanResult, ClusterError> {
    if !(eps > 0.0) || min_pts < 2 {
        return Err(ClusterError::InvalidParam(format!("eps={eps} min_pts={min_pts}")));
    }
    let n = x.nrows();
    if n > cap {
        return Err(ClusterError::SampleTooLarge { n, cap });
    }
    let nb = neighborhoods(x, eps);
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0i64;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &nb[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(DbscanResult { labels, core, eps, min_pts, n_clusters: next as usize })
}

/// Distance from each row to its `k`-th nearest other row, sorted ascending.
pub fn k_distance_curve(x: &Matrix, k: usize) -> Result<Vec<f64>, ClusterError> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(ClusterError::KTooLarge { k, n: n.saturating_sub(1) });
    }
    let mut out = crate::par::map_indexed(n, |i| {
        let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sq_dist(x.row(i), x.row(j))).collect();
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d[k - 1].sqrt()
    });
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Epsilon at the largest second difference of a sorted k-distance curve.
pub fn knee_eps(curve: &[f64]) -> Option<f64> {
    max_second_difference(curve).map(|i| curve[i])
}
