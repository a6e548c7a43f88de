//! Single-pass corpus aggregation: language filter, sentiment, day and user
//! aggregates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{DailyAggregator, DailyFeatureRow, UserAggregate, UserAggregator};
use crate::ingest::RawTweet;
use crate::nlp::TextPipeline;

/// Mergeable per-shard state. Day rows use accepted-language tweets only;
/// user aggregates count every in-window tweet.
#[derive(Debug, Default)]
pub struct CorpusAccumulator {
    daily: DailyAggregator,
    users: UserAggregator,
    languages: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusAggregate {
    pub daily: Vec<DailyFeatureRow>,
    pub users: Vec<UserAggregate>,
    pub languages: LanguageCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCounts {
    pub accepted: u64,
    pub by_language: BTreeMap<String, u64>,
}

impl CorpusAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: &RawTweet, nlp: &TextPipeline) {
        let verdict = nlp.detector.detect(&t.text);
        if verdict.is(&nlp.language) {
            let mut buf = String::with_capacity(t.text.len());
            let mut ends = Vec::new();
            nlp.tokenizer.for_each_token(&t.text, |tok| {
                buf.push_str(tok);
                ends.push(buf.len());
            });
            let tokens: Vec<&str> = ends.iter().scan(0, |start, &end| Some(&buf[std::mem::replace(start, end)..end])).collect();
            let label = crate::nlp::score_sentiment(&tokens, &nlp.lexicon, nlp.neutral_threshold).label;
            self.daily.add_tweet(t, label);
        }
        match self.languages.get_mut(verdict.lang.as_str()) {
            Some(c) => *c += 1,
            None => {
                self.languages.insert(verdict.lang, 1);
            }
        }
        self.users.add(t);
    }

    pub fn merge(&mut self, other: CorpusAccumulator) {
        self.daily.merge(other.daily);
        self.users.merge(other.users);
        for (k, v) in other.languages {
            *self.languages.entry(k).or_default() += v;
        }
    }

    pub fn finish(self, language: &str) -> CorpusAggregate {
        let accepted = self.languages.get(language).copied().unwrap_or(0);
        CorpusAggregate {
            daily: self.daily.finish(),
            users: self.users.finish(),
            languages: LanguageCounts { accepted, by_language: self.languages },
        }
    }
}

pub fn aggregate_corpus<'a>(tweets: impl IntoIterator<Item = &'a RawTweet>, nlp: &TextPipeline) -> CorpusAggregate {
    let mut acc = CorpusAccumulator::new();
    for t in tweets {
        acc.add(t, nlp);
    }
    acc.finish(&nlp.language)
}
