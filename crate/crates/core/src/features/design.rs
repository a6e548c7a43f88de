use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::daily::DailyFeatureRow;
use super::FeatureError;
use crate::linalg::Matrix;

pub const MIN_SPLIT_ROWS: usize = 20;
pub const DEFAULT_TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(format!("unknown task {s:?}")),
        }
    }
}

const DOW: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/// Frozen model input column order.
pub fn feature_columns() -> &'static [String] {
    static COLS: OnceLock<Vec<String>> = OnceLock::new();
    COLS.get_or_init(|| {
        let mut c: Vec<String> = ["tweet_volume", "likes_sum", "replies_sum", "retweets_sum"].map(String::from).to_vec();
        c.extend(super::daily::LIKE_THRESHOLDS.iter().map(|t| format!("likes_gt_{t}")));
        c.extend(super::daily::RETWEET_THRESHOLDS.iter().map(|t| format!("retweets_gt_{t}")));
        c.extend(["sent_positive", "sent_negative", "sent_neutral"].map(String::from));
        c.extend((0..24).map(|h| format!("hour_{h:02}")));
        c.extend(DOW.iter().map(|d| format!("dow_{d}")));
        c.extend(["prev_close", "close"].map(String::from));
        c
    })
}

pub fn n_features() -> usize {
    feature_columns().len()
}

fn is_dow(col: &str) -> bool {
    col.starts_with("dow_")
}

/// Feature values of one labelled row, in [`feature_columns`] order.
pub fn feature_vector(r: &DailyFeatureRow) -> Option<Vec<f64>> {
    let p = r.price?;
    let mut v = Vec::with_capacity(n_features());
    v.extend([r.tweet_volume, r.likes_sum, r.replies_sum, r.retweets_sum].map(|x| x as f64));
    v.extend(r.likes_gt.iter().chain(&r.retweets_gt).chain(&r.sent_counts).chain(&r.hour_hist).map(|&x| x as f64));
    v.extend(r.dow_onehot().map(f64::from));
    v.extend([p.prev_close, p.close]);
    Some(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    pub task: Task,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            columns: self.columns.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            task: self.task,
        }
    }
}

/// Unscaled design matrix from labelled rows. Rows without a next close are
/// skipped; output is sorted by date.
pub fn assemble_raw(rows: &[DailyFeatureRow], task: Task) -> Result<DesignMatrix, FeatureError> {
    let mut usable: Vec<&DailyFeatureRow> = rows.iter().filter(|r| r.price.is_some_and(|p| p.next_close.is_some())).collect();
    usable.sort_by_key(|r| r.date);
    if usable.windows(2).any(|w| w[0].date == w[1].date) {
        return Err(FeatureError::DuplicateDate);
    }
    if usable.is_empty() {
        return Err(FeatureError::EmptyRows);
    }
    let d = n_features();
    let mut data = Vec::with_capacity(usable.len() * d);
    let mut y = Vec::with_capacity(usable.len());
    for r in &usable {
        data.extend(feature_vector(r).expect("filtered for price"));
        let p = r.price.expect("filtered for price");
        y.push(match task {
            Task::Regression => p.next_close.expect("filtered"),
            Task::Classification => f64::from(p.direction().expect("filtered")),
        });
    }
    if task == Task::Classification {
        let pos = y.iter().filter(|&&v| v == 1.0).count();
        if pos == 0 || pos == y.len() {
            return Err(FeatureError::ConstantTarget);
        }
    }
    Ok(DesignMatrix {
        columns: feature_columns().to_vec(),
        x: Matrix::from_vec(usable.len(), d, data),
        y,
        dates: usable.iter().map(|r| r.date).collect(),
        task,
    })
}

/// Builds the design matrix and standardizes it. A fresh scaler is fitted on
/// these rows when `scaler` is `None`; otherwise the given one is applied.
pub fn assemble_design_matrix(
    rows: &[DailyFeatureRow],
    task: Task,
    scaler: Option<&ScalerParams>,
) -> Result<(DesignMatrix, ScalerParams), FeatureError> {
    let mut m = assemble_raw(rows, task)?;
    let s = match scaler {
        Some(s) => s.clone(),
        None => ScalerParams::fit(&m)?,
    };
    s.apply(&mut m)?;
    Ok((m, s))
}

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// False for exempt (weekday) and constant columns, which pass through.
    pub scaled: Vec<bool>,
}

impl ScalerParams {
    pub fn fit(m: &DesignMatrix) -> Result<Self, FeatureError> {
        if m.x.is_standardized() {
            return Err(FeatureError::AlreadyScaled);
        }
        if m.is_empty() {
            return Err(FeatureError::EmptyRows);
        }
        let n = m.x.nrows() as f64;
        let means = m.x.column_means();
        let mut var = vec![0.0; m.x.ncols()];
        for row in m.x.rows_iter() {
            for ((v, x), mu) in var.iter_mut().zip(row).zip(&means) {
                *v += (x - mu) * (x - mu);
            }
        }
        let stds: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let scaled = m
            .columns
            .iter()
            .zip(stds.iter().zip(&means))
            .map(|(c, (s, mu))| !is_dow(c) && *s > 1e-12 * (1.0 + mu.abs()))
            .collect();
        Ok(Self { columns: m.columns.clone(), means, stds, scaled })
    }

    pub fn constant_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .zip(&self.scaled)
            .filter(|(c, s)| !**s && !is_dow(c))
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn apply(&self, m: &mut DesignMatrix) -> Result<(), FeatureError> {
        if m.x.is_standardized() {
            return Err(FeatureError::AlreadyScaled);
        }
        if m.columns != self.columns {
            return Err(FeatureError::ColumnMismatch { expected: self.columns.join(","), found: m.columns.join(",") });
        }
        for i in 0..m.x.nrows() {
            let row = m.x.row_mut(i);
            for j in 0..row.len() {
                if self.scaled[j] {
                    row[j] = (row[j] - self.means[j]) / self.stds[j];
                }
            }
        }
        m.x.set_standardized(true);
        Ok(())
    }

    /// Scales a single raw feature vector.
    pub fn transform_row(&self, row: &mut [f64]) {
        for j in 0..row.len() {
            if self.scaled[j] {
                row[j] = (row[j] - self.means[j]) / self.stds[j];
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("format=scaler/1\n");
        s.push_str(&format!("columns={}\n", self.columns.join(",")));
        for j in 0..self.columns.len() {
            s.push_str(&format!("{}={},{},{}\n", self.columns[j], self.means[j], self.stds[j], u8::from(self.scaled[j])));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let bad = |line: usize, reason: &str| FeatureError::Parse { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "format=scaler/1")) => {}
            Some((i, _)) => return Err(bad(i + 1, "unsupported scaler format")),
            None => return Err(bad(0, "empty scaler file")),
        }
        let (ci, cl) = lines.next().ok_or_else(|| bad(0, "missing columns"))?;
        let columns: Vec<String> = cl.strip_prefix("columns=").ok_or_else(|| bad(ci + 1, "missing columns"))?.split(',').map(String::from).collect();
        let (mut means, mut stds, mut scaled) = (Vec::new(), Vec::new(), Vec::new());
        for (j, col) in columns.iter().enumerate() {
            let (i, l) = lines.next().ok_or_else(|| bad(0, "truncated scaler file"))?;
            let (name, vals) = l.split_once('=').ok_or_else(|| bad(i + 1, "expected name=mean,std,flag"))?;
            if name != col {
                return Err(bad(i + 1, &format!("expected column {col} at position {j}")));
            }
            let parts: Vec<&str> = vals.split(',').collect();
            if parts.len() != 3 {
                return Err(bad(i + 1, "expected mean,std,flag"));
            }
            means.push(parts[0].parse().map_err(|_| bad(i + 1, "bad mean"))?);
            stds.push(parts[1].parse().map_err(|_| bad(i + 1, "bad std"))?);
            scaled.push(match parts[2] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(i + 1, "bad flag")),
            });
        }
        Ok(Self { columns, means, stds, scaled })
    }
}

/// Splits by date: the latest `round(test_fraction * n)` days form the test set.
pub fn chronological_split(m: &DesignMatrix, test_fraction: f64) -> Result<(DesignMatrix, DesignMatrix), FeatureError> {
    if !(test_fraction > 0.0 && test_fraction < 0.5) {
        return Err(FeatureError::InvalidFraction(test_fraction));
    }
    let n = m.len();
    if n < MIN_SPLIT_ROWS {
        return Err(FeatureError::TooFewRows { n, min: MIN_SPLIT_ROWS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| m.dates[i]);
    let n_test = (test_fraction * n as f64).round() as usize;
    let (train, test) = order.split_at(n - n_test);
    Ok((m.select(train), m.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::daily::PriceJoin;
    use chrono::Days;
    use proptest::prelude::*;

    fn rows(n: usize) -> Vec<DailyFeatureRow> {
        let start = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        (0..n)
            .map(|i| {
                let mut r = DailyFeatureRow::empty(start + Days::new(i as u64));
                let v = (i * 7 % 13) as u64 + 1;
                r.tweet_volume = v;
                r.likes_sum = v * 3 + i as u64;
                r.replies_sum = v;
                r.retweets_sum = (i % 5) as u64;
                r.likes_gt = [v, v / 2, 0, 0];
                r.sent_counts = [v, 0, 0];
                r.hour_hist[10] = v;
                let c = 1000.0 + (i as f64 * 1.7).sin() * 50.0;
                r.price = Some(PriceJoin { prev_close: c - 3.0, close: c, next_close: Some(c + ((i % 3) as f64 - 1.0)) });
                r
            })
            .collect()
    }

    #[test]
    fn column_list_is_frozen() {
        let c = feature_columns();
        assert_eq!(c.len(), 46);
        assert_eq!(c[0], "tweet_volume");
        assert_eq!(c[4], "likes_gt_0");
        assert_eq!(c[13], "hour_00");
        assert_eq!(c[37], "dow_mon");
        assert_eq!(&c[44..], ["prev_close", "close"]);
    }

    #[test]
    fn fitted_scaler_standardizes() {
        let (m, s) = assemble_design_matrix(&rows(60), Task::Regression, None).unwrap();
        assert!(m.x.is_standardized());
        for j in 0..m.x.ncols() {
            let col = m.x.column(j);
            let mu = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            if s.scaled[j] {
                assert!(mu.abs() < 1e-9, "{} mean {mu}", m.columns[j]);
                assert!((sd - 1.0).abs() < 1e-9, "{} std {sd}", m.columns[j]);
            }
        }
        // dow columns stay 0/1
        let dow = m.columns.iter().position(|c| c == "dow_mon").unwrap();
        assert!(m.x.column(dow).iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn constant_column_passes_through() {
        let (m, s) = assemble_design_matrix(&rows(30), Task::Regression, None).unwrap();
        let j = m.columns.iter().position(|c| c == "likes_gt_1000").unwrap();
        assert!(!s.scaled[j]);
        assert!(s.constant_columns().contains(&"likes_gt_1000"));
        assert!(m.x.column(j).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn test_rows_use_train_scaler() {
        let all = rows(80);
        let (_, s) = assemble_design_matrix(&all[..60], Task::Regression, None).unwrap();
        let (test, s2) = assemble_design_matrix(&all[60..], Task::Regression, Some(&s)).unwrap();
        assert_eq!(s, s2);
        let j = m_col(&test, "likes_sum");
        let mu = test.x.column(j).iter().sum::<f64>() / test.len() as f64;
        assert!(mu.abs() > 0.1);
    }

    fn m_col(m: &DesignMatrix, name: &str) -> usize {
        m.columns.iter().position(|c| c == name).unwrap()
    }

    #[test]
    fn second_scaling_is_rejected() {
        let (mut m, s) = assemble_design_matrix(&rows(30), Task::Regression, None).unwrap();
        assert_eq!(s.apply(&mut m), Err(FeatureError::AlreadyScaled));
        assert_eq!(ScalerParams::fit(&m), Err(FeatureError::AlreadyScaled));
    }

    #[test]
    fn single_class_target_errors() {
        let mut r = rows(25);
        for row in &mut r {
            let p = row.price.as_mut().unwrap();
            p.next_close = Some(p.close + 1.0);
        }
        assert_eq!(assemble_raw(&r, Task::Classification), Err(FeatureError::ConstantTarget));
    }

    #[test]
    fn unlabelled_last_day_is_excluded() {
        let mut r = rows(25);
        r[24].price.as_mut().unwrap().next_close = None;
        let m = assemble_raw(&r, Task::Classification).unwrap();
        assert_eq!(m.len(), 24);
        assert_eq!(m.dates.last(), Some(&r[23].date));
    }

    #[test]
    fn scaler_text_round_trip() {
        let (_, s) = assemble_design_matrix(&rows(40), Task::Classification, None).unwrap();
        assert_eq!(ScalerParams::from_text(&s.to_text()).unwrap(), s);
        assert!(ScalerParams::from_text("format=scaler/9\n").is_err());
    }

    #[test]
    fn split_sizes() {
        let m = assemble_raw(&rows(1100), Task::Regression).unwrap();
        let (tr, te) = chronological_split(&m, 0.1).unwrap();
        assert_eq!((tr.len(), te.len()), (990, 110));
        assert_eq!(te.dates[0], m.dates[990]);
        let m = assemble_raw(&rows(20), Task::Regression).unwrap();
        let (tr, te) = chronological_split(&m, 0.1).unwrap();
        assert_eq!((tr.len(), te.len()), (18, 2));
        let small = assemble_raw(&rows(19), Task::Regression).unwrap();
        assert_eq!(chronological_split(&small, 0.1).unwrap_err(), FeatureError::TooFewRows { n: 19, min: 20 });
        assert!(chronological_split(&m, 0.5).is_err());
        assert!(chronological_split(&m, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_by_date(n in 20usize..120, frac in 0.01f64..0.49, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let m = assemble_raw(&rows(n), Task::Regression).unwrap();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut crate::rng::seeded(seed));
            let shuffled = m.select(&idx);
            let (tr, te) = chronological_split(&shuffled, frac).unwrap();
            let (tr2, te2) = chronological_split(&m, frac).unwrap();
            prop_assert_eq!(&tr, &tr2);
            prop_assert_eq!(&te, &te2);
            prop_assert_eq!(te.len(), (frac * n as f64).round() as usize);
            prop_assert_eq!(tr.len() + te.len(), n);
            if let (Some(a), Some(b)) = (tr.dates.last(), te.dates.first()) {
                prop_assert!(a < b);
            }
            prop_assert!(tr.dates.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
