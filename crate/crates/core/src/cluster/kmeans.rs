use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{max_second_difference, ClusterError};
use crate::linalg::{sq_dist, Matrix};
use crate::rng::{derive_seed, seeded, DEFAULT_SEED};

/// A knee is trusted only when the model at the knee explains at least this
/// share of the one-cluster inertia.
pub const KNEE_MIN_EXPLAINED: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-6, n_init: 10, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Mean Euclidean distance to the assigned centroid.
    pub distortion: f64,
    pub iterations: usize,
    /// Inertia after each assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
}

/// Nearest centroid; on equal distance the current label is kept.
fn nearest(row: &[f64], centroids: &[Vec<f64>], current: usize) -> (usize, f64) {
    let mut best = (current, sq_dist(row, &centroids[current]));
    for (c, cent) in centroids.iter().enumerate() {
        let d = sq_dist(row, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &Matrix, centroids: &[Vec<f64>], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let out = crate::par::map_indexed(x.nrows(), |i| nearest(x.row(i), centroids, labels[i]));
    for (i, (c, d)) in out.into_iter().enumerate() {
        labels[i] = c;
        dists[i] = d;
    }
    dists.iter().sum()
}

/// Careful seeding: first center uniform, then each next center drawn with
/// probability proportional to the squared distance to the nearest chosen one.
fn plus_plus(x: &Matrix, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let mut rng = seeded(seed);
    let mut centers = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x.rows_iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (dd, r) in d2.iter_mut().zip(x.rows_iter()) {
            *dd = dd.min(sq_dist(r, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd iterations from the given centers.
fn lloyd(x: &Matrix, mut centroids: Vec<Vec<f64>>, p: &KmeansParams) -> KmeansResult {
    let (n, d, k) = (x.nrows(), x.ncols(), centroids.len());
    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut inertia = assign(x, &centroids, &mut labels, &mut dists);
        // empty clusters claim the point farthest from its centroid
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let mut repaired = false;
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n).filter(|&i| counts[labels[i]] > 1).max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            let Some(i) = far else { break };
            counts[labels[i]] -= 1;
            counts[c] = 1;
            labels[i] = c;
            inertia -= dists[i];
            dists[i] = 0.0;
            centroids[c] = x.row(i).to_vec();
            repaired = true;
        }
        trace.push(inertia);
        let mut next = vec![vec![0.0; d]; k];
        for (r, &l) in x.rows_iter().zip(&labels) {
            next[l].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for (c, s) in next.iter_mut().enumerate() {
            s.iter_mut().for_each(|v| *v /= counts[c] as f64);
        }
        let shift = centroids.iter().zip(&next).map(|(a, b)| sq_dist(a, b).sqrt()).fold(0.0, f64::max);
        centroids = next;
        if (shift < p.tol && !repaired) || iterations >= p.max_iter {
            break;
        }
    }
    let inertia = assign(x, &centroids, &mut labels, &mut dists);
    let distortion = dists.iter().map(|v| v.sqrt()).sum::<f64>() / n as f64;
    KmeansResult { centroids, labels, inertia, distortion, iterations, inertia_trace: trace }
}

fn check(x: &Matrix, k: usize) -> Result<(), ClusterError> {
    if x.nrows() == 0 {
        return Err(ClusterError::EmptyData);
    }
    if !x.is_standardized() {
        return Err(ClusterError::NotStandardized);
    }
    if k == 0 || k > x.nrows() {
        return Err(ClusterError::KTooLarge { k, n: x.nrows() });
    }
    Ok(())
}

fn best_of(runs: Vec<KmeansResult>) -> KmeansResult {
    runs.into_iter().reduce(|best, r| if r.inertia < best.inertia { r } else { best }).expect("at least one run")
}

fn run(x: &Matrix, k: usize, p: &KmeansParams, warm: Option<Vec<Vec<f64>>>) -> KmeansResult {
    let n_init = p.n_init.max(1);
    let mut runs = crate::par::map_indexed(n_init, |r| lloyd(x, plus_plus(x, k, derive_seed(p.seed, r as u64)), p));
    if let Some(w) = warm {
        runs.push(lloyd(x, w, p));
    }
    best_of(runs)
}

/// Best of `n_init` seeded restarts by inertia; earlier restarts win ties.
pub fn fit_kmeans(x: &Matrix, k: usize, p: &KmeansParams) -> Result<KmeansResult, ClusterError> {
    check(x, k)?;
    Ok(run(x, k, p, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub ks: Vec<usize>,
    pub inertia: Vec<f64>,
    pub distortion: Vec<f64>,
    pub knee: usize,
    pub low_confidence: bool,
}

impl ElbowScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,inertia,distortion\n");
        for ((k, i), d) in self.ks.iter().zip(&self.inertia).zip(&self.distortion) {
            s.push_str(&format!("{k},{i},{d}\n"));
        }
        s
    }
}

/// Fits every `k` in `ks_from..=ks_to` and locates the knee of the inertia
/// curve. Each `k` also restarts from the previous optimum plus its farthest
/// point, so inertia never increases along the scan.
///
/// When the knee explains less than [`KNEE_MIN_EXPLAINED`] of the
/// one-cluster inertia, or the curve has no interior point, the knee falls
/// back to the smallest `k` and is flagged low-confidence.
pub fn elbow_scan(x: &Matrix, ks_from: usize, ks_to: usize, p: &KmeansParams) -> Result<ElbowScan, ClusterError> {
    if ks_from == 0 || ks_from > ks_to {
        return Err(ClusterError::InvalidParam(format!("k range {ks_from}..={ks_to}")));
    }
    check(x, ks_to)?;
    let mut scan = ElbowScan { ks: Vec::new(), inertia: Vec::new(), distortion: Vec::new(), knee: ks_from, low_confidence: true };
    let mut prev: Option<KmeansResult> = None;
    for k in ks_from..=ks_to {
        let warm = prev.as_ref().map(|r| {
            let mut c = r.centroids.clone();
            let far = (0..x.nrows()).max_by(|&a, &b| {
                let da = sq_dist(x.row(a), &r.centroids[r.labels[a]]);
                let db = sq_dist(x.row(b), &r.centroids[r.labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            });
            c.push(x.row(far.unwrap_or(0)).to_vec());
            c
        });
        let res = run(x, k, p, warm);
        scan.ks.push(k);
        scan.inertia.push(res.inertia);
        scan.distortion.push(res.distortion);
        prev = Some(res);
    }
    if let Some(i) = max_second_difference(&scan.inertia) {
        let means = x.column_means();
        let total = x.rows_iter().map(|r| sq_dist(r, &means)).sum::<f64>();
        let explained = if total > 0.0 { 1.0 - scan.inertia[i] / total } else { 0.0 };
        if explained >= KNEE_MIN_EXPLAINED {
            scan.knee = scan.ks[i];
            scan.low_confidence = false;
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::super::{adjusted_rand_index, fixtures};
    use super::*;
    use proptest::prelude::*;

    fn assert_nearest(x: &Matrix, r: &KmeansResult) {
        for (i, row) in x.rows_iter().enumerate() {
            let own = sq_dist(row, &r.centroids[r.labels[i]]);
            assert!(r.centroids.iter().all(|c| own <= sq_dist(row, c)));
        }
    }

    #[test]
    fn k_equals_n() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [5.0, 5.0]]).into_standardized();
        let r = fit_kmeans(&x, 4, &KmeansParams::default()).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
        for (i, row) in x.rows_iter().enumerate() {
            assert_eq!(r.centroids[r.labels[i]], row);
        }
    }

    #[test]
    fn one_cluster_closed_form() {
        let (x, _) = fixtures::triangle(10, 1);
        let r = fit_kmeans(&x, 1, &KmeansParams::default()).unwrap();
        let means = x.column_means();
        for (a, b) in r.centroids[0].iter().zip(&means) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = x.nrows() as f64;
        let var: f64 = (0..2).map(|j| x.rows_iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sum();
        assert!((r.inertia - var * n).abs() < 1e-9);
    }

    #[test]
    fn planted_blobs_recovered() {
        let (x, truth) = fixtures::triangle(10, 2);
        let r = fit_kmeans(&x, 3, &KmeansParams::default()).unwrap();
        assert_eq!(adjusted_rand_index(&r.labels, &truth), 1.0);
        assert_nearest(&x, &r);
    }

    #[test]
    fn elbow_finds_three() {
        let (x, _) = fixtures::triangle(10, 3);
        let scan = elbow_scan(&x, 1, 10, &KmeansParams::default()).unwrap();
        assert_eq!(scan.knee, 3);
        assert!(!scan.low_confidence);
        assert!(scan.inertia.windows(2).all(|w| w[1] <= w[0]));
        assert!(scan.to_csv().starts_with("k,inertia,distortion\n1,"));
    }

    #[test]
    fn single_blob_is_low_confidence() {
        let (x, _) = fixtures::blobs(&[[0.0, 0.0]], 40, 0.1, 4);
        let scan = elbow_scan(&x, 1, 10, &KmeansParams::default()).unwrap();
        assert_eq!(scan.knee, 1);
        assert!(scan.low_confidence);
        assert!(scan.inertia.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        assert_eq!(fit_kmeans(&x, 1, &KmeansParams::default()).unwrap_err(), ClusterError::NotStandardized);
        let x = x.into_standardized();
        assert_eq!(fit_kmeans(&x, 3, &KmeansParams::default()).unwrap_err(), ClusterError::KTooLarge { k: 3, n: 2 });
    }

    #[test]
    fn duplicate_points_keep_clusters_non_empty() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [0.0], [1.0]]).into_standardized();
        let r = fit_kmeans(&x, 3, &KmeansParams::default()).unwrap();
        let mut seen = [false; 3];
        r.labels.iter().for_each(|&l| seen[l] = true);
        assert!(seen.iter().all(|&s| s));
        assert_eq!(r.inertia, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lloyd_invariants(seed in any::<u64>(), k in 1usize..6) {
            let mut rng = seeded(seed);
            let x = Matrix::from_vec(25, 3, (0..75).map(|_| rng.random_range(-2.0..2.0)).collect()).into_standardized();
            let r = fit_kmeans(&x, k, &KmeansParams { n_init: 3, seed, ..Default::default() }).unwrap();
            prop_assert!(r.inertia_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
            assert_nearest(&x, &r);
            let mut seen = vec![false; k];
            r.labels.iter().for_each(|&l| seen[l] = true);
            prop_assert!(seen.iter().all(|&s| s));
            prop_assert!(r.inertia >= 0.0);
        }
    }
}
