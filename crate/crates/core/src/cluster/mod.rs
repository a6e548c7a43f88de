//! User-level clustering: k-means with elbow selection, Ward agglomerative
//! clustering and DBSCAN.

mod dbscan;
mod hierarchical;
mod kmeans;

pub use dbscan::{fit_dbscan, k_distance_curve, knee_eps, DbscanResult, NOISE};
pub use hierarchical::{cut_k, fit_agglomerative, subsample, Dendrogram, DendrogramMerge, DEFAULT_SAMPLE_CAP};
pub use kmeans::{elbow_scan, fit_kmeans, ElbowScan, KmeansParams, KmeansResult, KNEE_MIN_EXPLAINED};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no rows to cluster")]
    EmptyData,
    #[error("k={k} must lie in 1..={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("sample of {n} rows exceeds the cap of {cap}; subsample first")]
    SampleTooLarge { n: usize, cap: usize },
    #[error("input matrix must be standardized before clustering")]
    NotStandardized,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Index of the largest interior second forward difference
/// `v[i-1] - 2 v[i] + v[i+1]`; ties go to the lowest index.
pub fn max_second_difference(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..v.len().saturating_sub(1) {
        let d = v[i - 1] - 2.0 * v[i] + v[i + 1];
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index<A: Ord + Copy, B: Ord + Copy>(a: &[A], b: &[B]) -> f64 {
    use std::collections::BTreeMap;
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let c2 = |m: usize| (m * m.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(A, B), usize> = BTreeMap::new();
    let mut ra: BTreeMap<A, usize> = BTreeMap::new();
    let mut rb: BTreeMap<B, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&m| c2(m)).sum();
    let sa: f64 = ra.values().map(|&m| c2(m)).sum();
    let sb: f64 = rb.values().map(|&m| c2(m)).sum();
    let total = c2(a.len());
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::linalg::Matrix;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Gaussian blobs around `centers`, `per` rows each, in center order.
    pub fn blobs(centers: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = seeded(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push([center[0] + sigma * rng.sample::<f64, _>(StandardNormal), center[1] + sigma * rng.sample::<f64, _>(StandardNormal)]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).into_standardized(), labels)
    }

    /// Three blobs on an equilateral triangle of side 10 with spread 0.5.
    pub fn triangle(per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 8.660254037844386]], per, 0.5, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rand_index_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        // contingency 2,1,1,2: index 2, row sums 6, column sums 3, 15 pairs
        let got = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]);
        let expect = (2.0 - 6.0 * 3.0 / 15.0) / (4.5 - 6.0 * 3.0 / 15.0);
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn second_difference_knee() {
        assert_eq!(max_second_difference(&[10.0, 5.0, 1.0, 0.9, 0.8]), Some(2));
        assert_eq!(max_second_difference(&[1.0, 2.0]), None);
    }
}
