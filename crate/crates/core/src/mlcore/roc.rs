use serde::{Deserialize, Serialize};

use super::metrics::check_lengths;
use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (fpr, tpr), from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Threshold that produced each point; the first is +inf.
    #[serde(with = "nonfinite")]
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for (t, (f, r)) in self.thresholds.iter().zip(&self.points) {
            s.push_str(&format!("{t},{f},{r}\n"));
        }
        s
    }
}

/// Writes infinite thresholds as the strings `inf` and `-inf`, which JSON
/// cannot carry as numbers.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&t| match t {
            t if t.is_finite() => Num::F(t),
            t if t > 0.0 => Num::S("inf".into()),
            t if t < 0.0 => Num::S("-inf".into()),
            _ => Num::S("nan".into()),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Num>::deserialize(d)?
            .into_iter()
            .map(|n| match n {
                Num::F(t) => Ok(t),
                Num::S(s) => s.parse::<f64>().map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

/// Sweeps every distinct score, highest first; tied scores move together so
/// the trapezoid area counts ties as one half.
pub fn roc_curve_auc(y_true: &[f64], scores: &[f64]) -> Result<RocCurve, MetricsError> {
    check_lengths(y_true, scores)?;
    if let Some(&s) = scores.iter().find(|s| s.is_nan()) {
        return Err(MetricsError::NonFinite(s));
    }
    let mut pos = 0u64;
    for &v in y_true {
        if v == 1.0 {
            pos += 1;
        } else if v != 0.0 {
            return Err(MetricsError::NonBinary(v));
        }
    }
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if y_true[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let &(x0, y0) = points.last().expect("non-empty");
        auc += (p.0 - x0) * (p.1 + y0) / 2.0;
        points.push(p);
        thresholds.push(t);
    }
    Ok(RocCurve { points, thresholds, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair_oracle(y: &[f64], s: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1.0 && y[j] == 0.0 {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn json_round_trip_keeps_infinite_threshold() {
        let r = roc_curve_auc(&[0.0, 1.0, 1.0], &[0.1, 0.7, 0.4]).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<RocCurve>(&text).unwrap(), r);
    }

    #[test]
    fn separated_and_tied() {
        let y = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(roc_curve_auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap().auc, 1.0);
        let r = roc_curve_auc(&y, &[0.5; 4]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(roc_curve_auc(&[1.0, 1.0], &[0.1, 0.2]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn matches_pair_count_oracle() {
        let mut rng = crate::rng::seeded(12);
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        // coarse scores so ties occur
        let s: Vec<f64> = (0..12).map(|_| (rng.random_range(0.0..1.0f64) * 5.0).floor() / 5.0).collect();
        let r = roc_curve_auc(&y, &s).unwrap();
        assert!((r.auc - pair_oracle(&y, &s)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn curve_shape_and_monotone_invariance(
            data in prop::collection::vec((any::<bool>(), -50i32..50), 2..60)
        ) {
            let y: Vec<f64> = data.iter().map(|d| f64::from(u8::from(d.0))).collect();
            prop_assume!(y.contains(&0.0) && y.contains(&1.0));
            let s: Vec<f64> = data.iter().map(|d| d.1 as f64 / 10.0).collect();
            let r = roc_curve_auc(&y, &s).unwrap();
            prop_assert_eq!(r.points[0], (0.0, 0.0));
            prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
            prop_assert!(r.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            prop_assert!((r.auc - pair_oracle(&y, &s)).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            prop_assert!((roc_curve_auc(&y, &t).unwrap().auc - r.auc).abs() < 1e-12);
        }
    }
}
