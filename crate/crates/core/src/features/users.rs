//! User-level aggregation for clustering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::RawTweet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAggregate {
    pub username: String,
    pub tweet_count: u64,
    pub likes_sum: u64,
    pub replies_sum: u64,
    pub retweets_sum: u64,
}

impl UserAggregate {
    /// Clustering features: tweet count, likes, replies, retweets.
    pub fn feature_vector(&self) -> [f64; 4] {
        [self.tweet_count as f64, self.likes_sum as f64, self.replies_sum as f64, self.retweets_sum as f64]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserAggregator {
    users: BTreeMap<String, UserAggregate>,
}

impl UserAggregator {
    pub fn add(&mut self, t: &RawTweet) {
        let u = self.users.entry(t.username.clone()).or_insert_with(|| UserAggregate {
            username: t.username.clone(),
            tweet_count: 0,
            likes_sum: 0,
            replies_sum: 0,
            retweets_sum: 0,
        });
        u.tweet_count += 1;
        u.likes_sum += t.likes;
        u.replies_sum += t.replies;
        u.retweets_sum += t.retweets;
    }

    pub fn merge(&mut self, other: UserAggregator) {
        for (name, o) in other.users {
            match self.users.get_mut(&name) {
                Some(u) => {
                    u.tweet_count += o.tweet_count;
                    u.likes_sum += o.likes_sum;
                    u.replies_sum += o.replies_sum;
                    u.retweets_sum += o.retweets_sum;
                }
                None => {
                    self.users.insert(name, o);
                }
            }
        }
    }

    /// Sorted by username.
    pub fn finish(self) -> Vec<UserAggregate> {
        self.users.into_values().collect()
    }
}

pub fn aggregate_users<'a>(tweets: impl IntoIterator<Item = &'a RawTweet>) -> Vec<UserAggregate> {
    let mut agg = UserAggregator::default();
    for t in tweets {
        agg.add(t);
    }
    agg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn tw(user: &str, likes: u64) -> RawTweet {
        RawTweet {
            id: format!("{user}{likes}"),
            username: user.into(),
            timestamp: Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap(),
            replies: 2,
            likes,
            retweets: 3,
            text: String::new(),
        }
    }

    #[test]
    fn sums_per_user() {
        let users = aggregate_users(&[tw("a", 1), tw("a", 2)]);
        assert_eq!(users.len(), 1);
        assert_eq!(users[0].tweet_count, 2);
        assert_eq!(users[0].likes_sum, 3);
        assert_eq!(users[0].replies_sum, 4);
    }

    #[test]
    fn single_tweet_user() {
        let t = tw("solo", 7);
        let u = &aggregate_users([&t])[0];
        assert_eq!((u.tweet_count, u.likes_sum, u.replies_sum, u.retweets_sum), (1, 7, 2, 3));
    }

    #[test]
    fn partition_property() {
        let names = ["a", "b", "c", "a", "b", "a", "c", "c", "a", "b"];
        let tweets: Vec<_> = names.iter().enumerate().map(|(i, n)| tw(n, i as u64)).collect();
        let users = aggregate_users(&tweets);
        assert_eq!(users.len(), 3);
        assert_eq!(users.iter().map(|u| u.tweet_count).sum::<u64>(), 10);
        let mut left = UserAggregator::default();
        let mut right = UserAggregator::default();
        tweets[..4].iter().for_each(|t| left.add(t));
        tweets[4..].iter().for_each(|t| right.add(t));
        left.merge(right);
        assert_eq!(left.finish(), users);
    }
}
