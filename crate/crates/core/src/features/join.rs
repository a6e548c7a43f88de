use std::collections::{BTreeMap, HashMap};

use chrono::{Days, NaiveDate};

use super::daily::{DailyFeatureRow, PriceJoin};
use super::FeatureError;
use crate::ingest::PriceBar;

/// Fills zero-tweet days between the first and last row, then attaches the
/// previous, current and next close to every day. Only the final day may
/// lack a next close; it stays in the output but has no direction.
pub fn join_prices_and_label(rows: Vec<DailyFeatureRow>, prices: &[PriceBar]) -> Result<Vec<DailyFeatureRow>, FeatureError> {
    let mut by_day: BTreeMap<NaiveDate, DailyFeatureRow> = rows.into_iter().map(|r| (r.date, r)).collect();
    let (Some(&first), Some(&last)) = (by_day.keys().next(), by_day.keys().next_back()) else {
        return Ok(Vec::new());
    };
    let mut d = first;
    while d < last {
        d = d + Days::new(1);
        by_day.entry(d).or_insert_with(|| DailyFeatureRow::empty(d));
    }

    let close: HashMap<NaiveDate, f64> = prices.iter().map(|b| (b.date, b.close)).collect();
    let lookup = |day: NaiveDate| close.get(&day).copied().ok_or(FeatureError::PriceCoverageGap(day));
    for (&day, row) in by_day.iter_mut() {
        let prev_close = lookup(day - Days::new(1))?;
        let today = lookup(day)?;
        let next_close = match lookup(day + Days::new(1)) {
            Ok(c) => Some(c),
            Err(_) if day == last => None,
            Err(e) => return Err(e),
        };
        row.price = Some(PriceJoin { prev_close, close: today, next_close });
    }
    Ok(by_day.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 3, d).unwrap()
    }

    fn bars(closes: &[(u32, f64)]) -> Vec<PriceBar> {
        closes.iter().map(|&(d, c)| PriceBar { date: day(d), close: c }).collect()
    }

    #[test]
    fn attaches_prices_and_direction() {
        let prices = bars(&[(1, 100.0), (2, 110.0), (3, 105.0), (4, 105.0)]);
        let rows = join_prices_and_label(vec![DailyFeatureRow::empty(day(2)), DailyFeatureRow::empty(day(3))], &prices).unwrap();
        assert_eq!(rows[0].price, Some(PriceJoin { prev_close: 100.0, close: 110.0, next_close: Some(105.0) }));
        assert_eq!(rows[0].direction(), Some(0));
        // flat next day is labelled down
        assert_eq!(rows[1].direction(), Some(0));
    }

    #[test]
    fn fills_missing_days_with_zero_counts() {
        let prices = bars(&[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0), (5, 5.0)]);
        let mut a = DailyFeatureRow::empty(day(2));
        a.tweet_volume = 1;
        a.hour_hist[0] = 1;
        a.sent_counts[2] = 1;
        let rows = join_prices_and_label(vec![a, DailyFeatureRow::empty(day(4))], &prices).unwrap();
        assert_eq!(rows.iter().map(|r| r.date).collect::<Vec<_>>(), vec![day(2), day(3), day(4)]);
        assert_eq!(rows[1].tweet_volume, 0);
        assert_eq!(rows[1].price.unwrap().close, 3.0);
    }

    #[test]
    fn last_day_has_no_target() {
        let prices = bars(&[(1, 1.0), (2, 2.0)]);
        let rows = join_prices_and_label(vec![DailyFeatureRow::empty(day(2))], &prices).unwrap();
        assert_eq!(rows[0].price.unwrap().next_close, None);
        assert_eq!(rows[0].direction(), None);
    }

    #[test]
    fn gap_is_an_error() {
        let prices = bars(&[(1, 1.0), (2, 2.0), (4, 4.0)]);
        let err = join_prices_and_label(vec![DailyFeatureRow::empty(day(2)), DailyFeatureRow::empty(day(4))], &prices).unwrap_err();
        assert_eq!(err, FeatureError::PriceCoverageGap(day(3)));
        let err = join_prices_and_label(vec![DailyFeatureRow::empty(day(1))], &prices).unwrap_err();
        assert_eq!(err, FeatureError::PriceCoverageGap(NaiveDate::from_ymd_opt(2018, 2, 28).unwrap()));
    }
}
