use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::linalg::{sq_dist, Matrix};
use crate::rng::seeded;

pub const DEFAULT_SAMPLE_CAP: usize = 2000;

/// One merge. Ids below `n` are input rows; merge `t` creates id `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DendrogramMerge {
    pub a: usize,
    pub b: usize,
    /// Increase in within-cluster sum of squares caused by the merge.
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<DendrogramMerge>,
}

impl Dendrogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,b,distance,size\n");
        for m in &self.merges {
            s.push_str(&format!("{},{},{},{}\n", m.a, m.b, m.distance, m.size));
        }
        s
    }

    pub fn cut_k(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        cut_k(self, k)
    }
}

/// Seeded uniform subsample without replacement, returned in row order
/// together with the chosen row indices. Inputs within the cap pass through.
pub fn subsample(x: &Matrix, cap: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let n = x.nrows();
    if n <= cap {
        return (x.clone(), (0..n).collect());
    }
    let mut idx = rand::seq::index::sample(&mut seeded(seed), n, cap).into_vec();
    idx.sort_unstable();
    (x.select_rows(&idx), idx)
}

/// Ward linkage with the merge cost `|A||B| / (|A|+|B|) · ‖c_A − c_B‖²`, so
/// two single points merge at `½‖x₁ − x₂‖²`. Costs are maintained with the
/// Lance–Williams recurrence; equal costs merge the pair with the smallest
/// `(a, b)` ids first.
pub fn fit_agglomerative(x: &Matrix, cap: usize) -> Result<Dendrogram, ClusterError> {
    let n = x.nrows();
    if n == 0 {
        return Err(ClusterError::EmptyData);
    }
    if n > cap {
        return Err(ClusterError::SampleTooLarge { n, cap });
    }
    let mut dist: Vec<Vec<f64>> = crate::par::map_indexed(n, |i| (0..n).map(|j| 0.5 * sq_dist(x.row(i), x.row(j))).collect());
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    let key = |d: f64, a: usize, b: usize| (d, a.min(b), a.max(b));
    let less = |p: (f64, usize, usize), q: (f64, usize, usize)| p.0 < q.0 || (p.0 == q.0 && (p.1, p.2) < (q.1, q.2));
    let nn_of = |i: usize, dist: &[Vec<f64>], ids: &[usize], active: &[bool]| -> Option<(usize, (f64, usize, usize))> {
        let mut best: Option<(usize, (f64, usize, usize))> = None;
        for j in (0..dist.len()).filter(|&j| j != i && active[j]) {
            let k = key(dist[i][j], ids[i], ids[j]);
            if best.is_none_or(|(_, b)| less(k, b)) {
                best = Some((j, k));
            }
        }
        best
    };
    let mut nn: Vec<Option<(usize, (f64, usize, usize))>> = (0..n).map(|i| nn_of(i, &dist, &ids, &active)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let (i, (j, k)) = (0..n)
            .filter(|&i| active[i])
            .filter_map(|i| nn[i].map(|v| (i, v)))
            .reduce(|p, q| if less(q.1 .1, p.1 .1) { q } else { p })
            .expect("two active clusters");
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        merges.push(DendrogramMerge { a: k.1, b: k.2, distance: k.0, size: sizes[i] + sizes[j] });
        let dij = dist[i][j];
        for m in (0..n).filter(|&m| active[m] && m != i && m != j) {
            let nm = sizes[m] as f64;
            let d = ((ni + nm) * dist[m][i] + (nj + nm) * dist[m][j] - nm * dij) / (ni + nj + nm);
            dist[m][i] = d;
            dist[i][m] = d;
        }
        active[j] = false;
        sizes[i] += sizes[j];
        ids[i] = n + t;
        nn[j] = None;
        nn[i] = nn_of(i, &dist, &ids, &active);
        for m in (0..n).filter(|&m| active[m] && m != i) {
            let stale = matches!(nn[m], Some((p, _)) if p == i || p == j);
            if stale {
                nn[m] = nn_of(m, &dist, &ids, &active);
            } else {
                let cand = key(dist[m][i], ids[m], ids[i]);
                if nn[m].is_none_or(|(_, b)| less(cand, b)) {
                    nn[m] = Some((i, cand));
                }
            }
        }
    }
    Ok(Dendrogram { n, merges })
}

/// Labels after applying the first `n − k` merges. Labels are numbered by
/// first appearance in row order.
pub fn cut_k(d: &Dendrogram, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = d.n;
    if k == 0 || k > n {
        return Err(ClusterError::KTooLarge { k, n });
    }
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    for (t, m) in d.merges.iter().take(n - k).enumerate() {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra] = n + t;
        parent[rb] = n + t;
    }
    let mut map = std::collections::HashMap::new();
    Ok((0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = map.len();
            *map.entry(r).or_insert(next)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::{adjusted_rand_index, fixtures};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn two_points() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]);
        let d = fit_agglomerative(&x, DEFAULT_SAMPLE_CAP).unwrap();
        assert_eq!(d.merges, vec![DendrogramMerge { a: 0, b: 1, distance: 12.5, size: 2 }]);
    }

    #[test]
    fn planted_partition() {
        let (x, truth) = fixtures::triangle(10, 5);
        let d = fit_agglomerative(&x, DEFAULT_SAMPLE_CAP).unwrap();
        assert_eq!(d.merges.len(), 29);
        assert_eq!(adjusted_rand_index(&d.cut_k(3).unwrap(), &truth), 1.0);
        assert_eq!(d.cut_k(1).unwrap(), vec![0; 30]);
        assert_eq!(d.cut_k(30).unwrap(), (0..30).collect::<Vec<_>>());
        assert!(d.to_csv().starts_with("a,b,distance,size\n"));
    }

    /// Ward cost recomputed from cluster members after every merge.
    fn brute_ward(x: &Matrix) -> Vec<f64> {
        let mut clusters: Vec<Vec<usize>> = (0..x.nrows()).map(|i| vec![i]).collect();
        let centroid = |c: &[usize]| -> Vec<f64> {
            let mut m = vec![0.0; x.ncols()];
            for &i in c {
                m.iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v / c.len() as f64);
            }
            m
        };
        let mut out = Vec::new();
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                    let cost = na * nb / (na + nb) * sq_dist(&centroid(&clusters[a]), &centroid(&clusters[b]));
                    if cost < best.0 {
                        best = (cost, a, b);
                    }
                }
            }
            out.push(best.0);
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        out
    }

    #[test]
    fn matches_member_recomputation() {
        let mut rng = seeded(6);
        let x = Matrix::from_vec(12, 3, (0..36).map(|_| rng.random_range(-1.0..1.0)).collect());
        let d = fit_agglomerative(&x, DEFAULT_SAMPLE_CAP).unwrap();
        for (m, b) in d.merges.iter().zip(brute_ward(&x)) {
            assert!((m.distance - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cap_and_subsample() {
        let x = Matrix::zeros(5, 1);
        assert_eq!(fit_agglomerative(&x, 4).unwrap_err(), ClusterError::SampleTooLarge { n: 5, cap: 4 });
        let (s, idx) = subsample(&Matrix::from_vec(100, 1, (0..100).map(f64::from).collect()), 10, 1);
        assert_eq!(s.nrows(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(&Matrix::zeros(100, 1), 10, 1).1, idx);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ward_merges_are_monotone(seed in any::<u64>(), n in 2usize..30) {
            let mut rng = seeded(seed);
            let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.random_range(-5.0..5.0)).collect());
            let d = fit_agglomerative(&x, DEFAULT_SAMPLE_CAP).unwrap();
            prop_assert_eq!(d.merges.len(), n - 1);
            prop_assert!(d.merges.windows(2).all(|w| w[1].distance >= w[0].distance * (1.0 - 1e-12)));
            prop_assert_eq!(d.merges.last().unwrap().size, n);
        }
    }
}
