//! Day-level aggregation.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::RawTweet;
use crate::nlp::SentimentLabel;

pub const LIKE_THRESHOLDS: [u64; 4] = [0, 10, 100, 1000];
pub const RETWEET_THRESHOLDS: [u64; 2] = [0, 100];

/// Prices joined onto a day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceJoin {
    pub prev_close: f64,
    pub close: f64,
    /// Absent for the last day of the series.
    pub next_close: Option<f64>,
}

impl PriceJoin {
    /// 1 when the next close is strictly above today's; flat counts as 0.
    pub fn direction(&self) -> Option<u8> {
        self.next_close.map(|n| u8::from(n > self.close))
    }
}

/// All tweet aggregates of one UTC day, plus prices once joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyFeatureRow {
    pub date: NaiveDate,
    pub tweet_volume: u64,
    pub likes_sum: u64,
    pub replies_sum: u64,
    pub retweets_sum: u64,
    /// Tweets with likes strictly above each of [`LIKE_THRESHOLDS`].
    pub likes_gt: [u64; 4],
    /// Tweets with retweets strictly above each of [`RETWEET_THRESHOLDS`].
    pub retweets_gt: [u64; 2],
    /// Positive, negative, neutral.
    pub sent_counts: [u64; 3],
    pub hour_hist: [u64; 24],
    pub price: Option<PriceJoin>,
}

impl DailyFeatureRow {
    pub fn empty(date: NaiveDate) -> Self {
        Self {
            date,
            tweet_volume: 0,
            likes_sum: 0,
            replies_sum: 0,
            retweets_sum: 0,
            likes_gt: [0; 4],
            retweets_gt: [0; 2],
            sent_counts: [0; 3],
            hour_hist: [0; 24],
            price: None,
        }
    }

    /// Monday-first one-hot encoding of the weekday.
    pub fn dow_onehot(&self) -> [u8; 7] {
        let mut v = [0; 7];
        v[self.date.weekday().num_days_from_monday() as usize] = 1;
        v
    }

    pub fn direction(&self) -> Option<u8> {
        self.price.and_then(|p| p.direction())
    }

    fn add(&mut self, hour: u32, likes: u64, replies: u64, retweets: u64, label: SentimentLabel) {
        self.tweet_volume += 1;
        self.likes_sum += likes;
        self.replies_sum += replies;
        self.retweets_sum += retweets;
        for (c, t) in self.likes_gt.iter_mut().zip(LIKE_THRESHOLDS) {
            *c += u64::from(likes > t);
        }
        for (c, t) in self.retweets_gt.iter_mut().zip(RETWEET_THRESHOLDS) {
            *c += u64::from(retweets > t);
        }
        let s = match label {
            SentimentLabel::Positive => 0,
            SentimentLabel::Negative => 1,
            SentimentLabel::Neutral => 2,
        };
        self.sent_counts[s] += 1;
        self.hour_hist[hour as usize] += 1;
    }

    fn merge(&mut self, o: &DailyFeatureRow) {
        self.tweet_volume += o.tweet_volume;
        self.likes_sum += o.likes_sum;
        self.replies_sum += o.replies_sum;
        self.retweets_sum += o.retweets_sum;
        add_arrays(&mut self.likes_gt, &o.likes_gt);
        add_arrays(&mut self.retweets_gt, &o.retweets_gt);
        add_arrays(&mut self.sent_counts, &o.sent_counts);
        add_arrays(&mut self.hour_hist, &o.hour_hist);
    }

    /// Checks the count invariants of a row.
    pub fn check_invariants(&self) -> Result<(), String> {
        let hours: u64 = self.hour_hist.iter().sum();
        let sents: u64 = self.sent_counts.iter().sum();
        if hours != self.tweet_volume || sents != self.tweet_volume {
            return Err(format!("{}: volume {} hours {} sentiments {}", self.date, self.tweet_volume, hours, sents));
        }
        if self.likes_gt.windows(2).any(|w| w[0] < w[1]) || self.retweets_gt.windows(2).any(|w| w[0] < w[1]) {
            return Err(format!("{}: threshold counts not monotone", self.date));
        }
        if self.likes_gt[0] > self.tweet_volume || self.retweets_gt[0] > self.tweet_volume {
            return Err(format!("{}: threshold count exceeds volume", self.date));
        }
        Ok(())
    }
}

fn add_arrays<const N: usize>(a: &mut [u64; N], b: &[u64; N]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Mergeable partial day-level aggregate. Merging is associative and
/// commutative, so shards can be combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DailyAggregator {
    days: BTreeMap<NaiveDate, DailyFeatureRow>,
}

impl DailyAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, timestamp: DateTime<Utc>, likes: u64, replies: u64, retweets: u64, label: SentimentLabel) {
        let date = timestamp.date_naive();
        self.days
            .entry(date)
            .or_insert_with(|| DailyFeatureRow::empty(date))
            .add(timestamp.hour(), likes, replies, retweets, label);
    }

    pub fn add_tweet(&mut self, t: &RawTweet, label: SentimentLabel) {
        self.add(t.timestamp, t.likes, t.replies, t.retweets, label);
    }

    pub fn merge(&mut self, other: DailyAggregator) {
        for (date, row) in other.days {
            match self.days.get_mut(&date) {
                Some(mine) => mine.merge(&row),
                None => {
                    self.days.insert(date, row);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// One row per day seen, ascending by date.
    pub fn finish(self) -> Vec<DailyFeatureRow> {
        self.days.into_values().collect()
    }
}

/// Aggregates labeled tweets to one row per UTC day present.
pub fn aggregate_daily<'a>(tweets: impl IntoIterator<Item = (&'a RawTweet, SentimentLabel)>) -> Vec<DailyFeatureRow> {
    let mut agg = DailyAggregator::new();
    for (t, l) in tweets {
        agg.add_tweet(t, l);
    }
    agg.finish()
}
