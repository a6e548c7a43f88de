//! Delimited text store for day-level rows.
//!
//! The first line is `# config_hash=<hex>`, the second the header: `date`,
//! the frozen feature columns, `next_close`, `direction`. Price cells are
//! empty for days without a price join.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::daily::{DailyFeatureRow, PriceJoin};
use super::design::feature_columns;
use super::FeatureError;

pub fn store_header() -> Vec<String> {
    let mut h = vec!["date".to_string()];
    h.extend(feature_columns().iter().cloned());
    h.push("next_close".into());
    h.push("direction".into());
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_feature_store<W: Write>(mut w: W, rows: &[DailyFeatureRow], config_hash: &str) -> Result<(), FeatureError> {
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "{}", store_header().join(","))?;
    let mut line = String::new();
    for r in rows {
        line.clear();
        line.push_str(&r.date.to_string());
        let counts = [r.tweet_volume, r.likes_sum, r.replies_sum, r.retweets_sum];
        for c in counts.iter().chain(&r.likes_gt).chain(&r.retweets_gt).chain(&r.sent_counts).chain(&r.hour_hist) {
            line.push(',');
            line.push_str(&c.to_string());
        }
        for d in r.dow_onehot() {
            line.push(',');
            line.push(if d == 1 { '1' } else { '0' });
        }
        let p = r.price;
        for v in [p.map(|p| p.prev_close), p.map(|p| p.close), p.and_then(|p| p.next_close)] {
            line.push(',');
            line.push_str(&opt(v));
        }
        line.push(',');
        if let Some(d) = r.direction() {
            line.push_str(&d.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_feature_store(path: &Path, rows: &[DailyFeatureRow], config_hash: &str) -> Result<(), FeatureError> {
    let mut buf = Vec::new();
    write_feature_store(&mut buf, rows, config_hash)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Rows plus the config hash recorded in the file.
pub fn read_feature_store<R: Read>(r: R) -> Result<(Vec<DailyFeatureRow>, String), FeatureError> {
    let mut lines = BufReader::new(r).lines();
    let bad = |line: usize, reason: String| FeatureError::Parse { line, reason };
    let first = lines.next().transpose()?.ok_or_else(|| bad(1, "empty feature store".into()))?;
    let hash = first.strip_prefix("# config_hash=").ok_or_else(|| bad(1, "missing config hash line".into()))?.to_string();
    let header = lines.next().transpose()?.ok_or_else(|| bad(2, "missing header".into()))?;
    let expected = store_header();
    if header.split(',').ne(expected.iter().map(String::as_str)) {
        return Err(FeatureError::ColumnMismatch { expected: expected.join(","), found: header });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let ln = i + 3;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected.len() {
            return Err(bad(ln, format!("expected {} cells, found {}", expected.len(), cells.len())));
        }
        let date = NaiveDate::parse_from_str(cells[0], "%Y-%m-%d").map_err(|e| bad(ln, format!("date: {e}")))?;
        let mut r = DailyFeatureRow::empty(date);
        let mut k = 1;
        let mut next_u = || -> Result<u64, FeatureError> {
            let v = cells[k].parse::<u64>().map_err(|_| bad(ln, format!("column {} is not a count", expected[k])));
            k += 1;
            v
        };
        r.tweet_volume = next_u()?;
        r.likes_sum = next_u()?;
        r.replies_sum = next_u()?;
        r.retweets_sum = next_u()?;
        for c in r.likes_gt.iter_mut().chain(r.retweets_gt.iter_mut()).chain(r.sent_counts.iter_mut()).chain(r.hour_hist.iter_mut()) {
            *c = next_u()?;
        }
        let mut dow = [0u64; 7];
        for d in &mut dow {
            *d = next_u()?;
        }
        if dow.map(|d| d as u8) != r.dow_onehot() {
            return Err(bad(ln, "weekday columns disagree with date".into()));
        }
        let f = |s: &str, name: &str| -> Result<Option<f64>, FeatureError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(ln, format!("{name} is not a number")))
            }
        };
        let n = cells.len();
        let prev = f(cells[n - 4], "prev_close")?;
        let close = f(cells[n - 3], "close")?;
        let next = f(cells[n - 2], "next_close")?;
        r.price = match (prev, close) {
            (Some(prev_close), Some(close)) => Some(PriceJoin { prev_close, close, next_close: next }),
            (None, None) if next.is_none() => None,
            _ => return Err(bad(ln, "incomplete price cells".into())),
        };
        let dir = cells[n - 1];
        if dir != r.direction().map(|d| d.to_string()).unwrap_or_default() {
            return Err(bad(ln, "direction disagrees with prices".into()));
        }
        r.check_invariants().map_err(|e| bad(ln, e))?;
        rows.push(r);
    }
    Ok((rows, hash))
}

pub fn load_feature_store(path: &Path) -> Result<(Vec<DailyFeatureRow>, String), FeatureError> {
    read_feature_store(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<DailyFeatureRow> {
        let mut a = DailyFeatureRow::empty(NaiveDate::from_ymd_opt(2018, 5, 4).unwrap());
        a.tweet_volume = 2;
        a.likes_sum = 15;
        a.likes_gt = [2, 1, 0, 0];
        a.sent_counts = [1, 0, 1];
        a.hour_hist[3] = 2;
        a.price = Some(PriceJoin { prev_close: 9000.25, close: 9100.1, next_close: Some(9050.0) });
        let mut b = DailyFeatureRow::empty(NaiveDate::from_ymd_opt(2018, 5, 5).unwrap());
        b.price = Some(PriceJoin { prev_close: 9100.1, close: 9050.0, next_close: None });
        let c = DailyFeatureRow::empty(NaiveDate::from_ymd_opt(2018, 5, 6).unwrap());
        vec![a, b, c]
    }

    #[test]
    fn round_trip() {
        let rows = sample();
        let mut buf = Vec::new();
        write_feature_store(&mut buf, &rows, "abc123").unwrap();
        let (back, hash) = read_feature_store(&buf[..]).unwrap();
        assert_eq!(hash, "abc123");
        assert_eq!(back, rows);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(2).unwrap().ends_with(",9000.25,9100.1,9050,0"));
    }

    #[test]
    fn header_is_checked() {
        let mut buf = Vec::new();
        write_feature_store(&mut buf, &sample(), "h").unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("likes_sum", "likes", 1);
        assert!(matches!(read_feature_store(text.as_bytes()), Err(FeatureError::ColumnMismatch { .. })));
    }

    #[test]
    fn inconsistent_row_is_rejected() {
        let mut buf = Vec::new();
        write_feature_store(&mut buf, &sample()[..1], "h").unwrap();
        let text = String::from_utf8(buf).unwrap().replace("2018-05-04,2,", "2018-05-04,3,");
        assert!(matches!(read_feature_store(text.as_bytes()), Err(FeatureError::Parse { line: 3, .. })));
    }
}
