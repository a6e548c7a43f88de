//! Synthetic corpora with planted structure.
//!
//! [`generate`] builds a tweet corpus where a daily mood drives sentiment mix
//! and volume, users follow one of three engagement archetypes, and the price
//! series is a fixed linear function of the day features the pipeline will
//! actually compute from those tweets, plus Gaussian noise.
//! [`write_bulk_corpus`] streams a large unstructured corpus for throughput
//! tests.

use std::collections::BTreeMap;
use std::io::{self, Write};

use chrono::{DateTime, Days, NaiveDate, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::aggregate_corpus;
use crate::features::DailyFeatureRow;
use crate::ingest::{header_line, serialize_tweet_row, PriceBar, RawTweet, TweetSchema};
use crate::nlp::TextPipeline;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_tweets: usize,
    pub start: NaiveDate,
    pub n_days: usize,
    pub n_users: usize,
    pub english_share: f64,
    /// Price change per net positive tweet.
    pub kappa: f64,
    pub noise_sd: f64,
    pub start_close: f64,
    /// Share of rows the ingest stage must drop (duplicates, out-of-window,
    /// malformed), spread evenly over the three kinds.
    pub junk_share: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_tweets: 10_000,
            start: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            n_days: 730,
            n_users: 400,
            english_share: 0.8,
            kappa: 25.0,
            noise_sd: 60.0,
            start_close: 10_000.0,
            junk_share: 0.015,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Casual,
    Active,
    Influencer,
}

impl Archetype {
    /// Relative posting rate and mean likes, replies, retweets per tweet.
    fn profile(self) -> (f64, f64, f64, f64) {
        match self {
            Archetype::Casual => (1.0, 2.0, 0.5, 0.5),
            Archetype::Active => (5.0, 25.0, 3.0, 8.0),
            Archetype::Influencer => (3.0, 800.0, 60.0, 250.0),
        }
    }
}

/// Ground truth: `next_close = close + kappa * (positive - negative - offset) + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub kappa: f64,
    pub offset: f64,
    pub noise_sd: f64,
    pub mood: Vec<f64>,
    pub archetypes: BTreeMap<String, Archetype>,
}

impl PlantedTruth {
    /// Noise-free next close for a joined day row.
    pub fn expected_next_close(&self, r: &DailyFeatureRow) -> Option<f64> {
        let p = r.price?;
        Some(p.close + self.kappa * (r.sent_counts[0] as f64 - r.sent_counts[1] as f64 - self.offset))
    }

    /// Weights over the named feature columns plus an intercept.
    pub fn linear_form(&self) -> (Vec<(&'static str, f64)>, f64) {
        (vec![("close", 1.0), ("sent_positive", self.kappa), ("sent_negative", -self.kappa)], -self.kappa * self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Clean in-window tweets, sorted by timestamp.
    pub tweets: Vec<RawTweet>,
    /// Rows the ingest stage must drop, paired with the clean row index they follow.
    pub junk: Vec<(usize, String)>,
    pub prices: Vec<PriceBar>,
    pub truth: PlantedTruth,
}

const OPENERS: &[&str] = &["", "", "I think that", "In my view", "It looks like", "Just saw that", "My brother told me that", "So", "Today"];
const SUBJECTS: &[&str] = &["bitcoin", "the price of bitcoin", "btc", "the crypto market", "this coin", "the market"];
const POSITIVE: &[&str] = &[
    "is doing great today",
    "looks really strong this week",
    "is a good buy at the moment",
    "made me very happy",
    "is an amazing chance for all of us",
    "keeps winning and I love it",
    "has a bright future",
    "is going to the moon",
    "is the best thing in my life",
];
const NEGATIVE: &[&str] = &[
    "is a terrible investment at the moment",
    "looks really bad this week",
    "made me so sad and angry",
    "is crashing and I hate it",
    "is a scam and we are all going down",
    "keeps failing and it is awful",
    "is a total disaster",
    "is the worst thing in my life",
    "makes me panic every day",
];
const NEUTRAL: &[&str] = &[
    "is at the same level as yesterday",
    "will be in the news later today",
    "is what everyone is talking about",
    "has moved since the morning",
    "is on my list for this week",
    "is what we are watching on the chart",
    "was the topic of the meeting at work",
];
const CLOSERS: &[&str] = &["", "", ".", " and we will see what happens next.", " what do you think?", " for the rest of the year.", " #bitcoin", " #btc #crypto"];

const FOREIGN: &[&str] = &[
    include_str!("../data/lang/de.txt"),
    include_str!("../data/lang/es.txt"),
    include_str!("../data/lang/fr.txt"),
    include_str!("../data/lang/it.txt"),
    include_str!("../data/lang/nl.txt"),
    include_str!("../data/lang/pt.txt"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tone {
    Positive,
    Negative,
    Neutral,
}

fn english_text(rng: &mut ChaCha8Rng, tone: Tone) -> String {
    let pool = match tone {
        Tone::Positive => POSITIVE,
        Tone::Negative => NEGATIVE,
        Tone::Neutral => NEUTRAL,
    };
    let opener = OPENERS.choose(rng).unwrap();
    let body = format!("{} {}", SUBJECTS.choose(rng).unwrap(), pool.choose(rng).unwrap());
    let mut s = if opener.is_empty() { capitalize(&body) } else { format!("{opener} {body}") };
    s.push_str(CLOSERS.choose(rng).unwrap());
    decorate(rng, s)
}

fn foreign_text(rng: &mut ChaCha8Rng) -> String {
    let text = FOREIGN.choose(rng).unwrap();
    let sentences: Vec<&str> = text.split_inclusive(['.', '?', '!']).map(str::trim).filter(|s| s.len() > 20).collect();
    let n = rng.random_range(1..=2);
    let start = rng.random_range(0..sentences.len() - n);
    decorate(rng, sentences[start..start + n].join(" "))
}

fn decorate(rng: &mut ChaCha8Rng, mut s: String) -> String {
    if rng.random_bool(0.15) {
        s = format!("@user{:04} {s}", rng.random_range(0..1000));
    }
    if rng.random_bool(0.15) {
        let tail: String = (0..10).map(|_| char::from(b"abcdefghijklmnopqrstuvwxyz0123456789"[rng.random_range(0..36)])).collect();
        s.push_str(&format!(" https://t.co/{tail}"));
    }
    s
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn engagement(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    Exp::new(1.0 / mean).unwrap().sample(rng).floor() as u64
}

fn timestamp(day: NaiveDate, secs: u32) -> DateTime<Utc> {
    day.and_hms_opt(0, 0, 0).unwrap().and_utc() + chrono::Duration::seconds(i64::from(secs))
}

/// Builds the planted corpus. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> SynthCorpus {
    assert!(spec.n_days >= 2 && spec.n_users >= 3 && spec.n_tweets > 0);
    let mut rng = seeded(derive_seed(spec.seed, 0));
    let normal = Normal::new(0.0, 1.0).unwrap();

    let mood: Vec<f64> = (0..spec.n_days).map(|_| normal.sample(&mut rng)).collect();
    let day_pick = WeightedIndex::new(mood.iter().map(|m| (0.3 * m.abs()).exp())).unwrap();

    let mut archetypes = BTreeMap::new();
    let mut users = Vec::with_capacity(spec.n_users);
    for u in 0..spec.n_users {
        let a = match u * 20 / spec.n_users {
            0 => Archetype::Influencer,
            1..=4 => Archetype::Active,
            _ => Archetype::Casual,
        };
        let name = format!("user{u:04}");
        archetypes.insert(name.clone(), a);
        users.push((name, a));
    }
    let user_pick = WeightedIndex::new(users.iter().map(|(_, a)| a.profile().0)).unwrap();

    let mut drafts: Vec<(DateTime<Utc>, usize, String)> = Vec::with_capacity(spec.n_tweets);
    for _ in 0..spec.n_tweets {
        let d = day_pick.sample(&mut rng);
        let u = user_pick.sample(&mut rng);
        let ts = timestamp(spec.start + Days::new(d as u64), rng.random_range(0..86_400));
        let text = if rng.random_bool(spec.english_share) {
            let lean = 0.25 * mood[d].tanh();
            let r: f64 = rng.random();
            let tone = if r < 0.3 + lean {
                Tone::Positive
            } else if r < 0.6 {
                Tone::Negative
            } else {
                Tone::Neutral
            };
            english_text(&mut rng, tone)
        } else {
            foreign_text(&mut rng)
        };
        drafts.push((ts, u, text));
    }
    drafts.sort_by(|a, b| a.0.cmp(&b.0));
    let tweets: Vec<RawTweet> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (timestamp, u, text))| {
            let (_, likes, replies, retweets) = users[u].1.profile();
            RawTweet {
                id: format!("{}", 950_000_000_000_000_000u64 + i as u64),
                username: users[u].0.clone(),
                timestamp,
                replies: engagement(&mut rng, replies),
                likes: engagement(&mut rng, likes),
                retweets: engagement(&mut rng, retweets),
                text,
            }
        })
        .collect();

    // prices are planted on the realized pipeline features
    let agg = aggregate_corpus(&tweets, &TextPipeline::english());
    let net: BTreeMap<NaiveDate, f64> = agg.daily.iter().map(|r| (r.date, r.sent_counts[0] as f64 - r.sent_counts[1] as f64)).collect();
    let offset = net.values().sum::<f64>() / spec.n_days as f64;
    let mut price_rng = seeded(derive_seed(spec.seed, 1));
    let noise = Normal::new(0.0, spec.noise_sd).unwrap();
    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    let first = spec.start - Days::new(1);
    let mut prices = vec![
        PriceBar { date: first, close: round2(spec.start_close - spec.kappa * normal.sample(&mut price_rng)) },
        PriceBar { date: spec.start, close: spec.start_close },
    ];
    for d in 0..spec.n_days {
        let day = spec.start + Days::new(d as u64);
        let close = prices.last().unwrap().close;
        let step = spec.kappa * (net.get(&day).copied().unwrap_or(0.0) - offset) + noise.sample(&mut price_rng);
        prices.push(PriceBar { date: day + Days::new(1), close: round2(close + step) });
    }

    let junk = junk_rows(spec, &tweets, &mut seeded(derive_seed(spec.seed, 2)));
    SynthCorpus { tweets, junk, prices, truth: PlantedTruth { kappa: spec.kappa, offset, noise_sd: spec.noise_sd, mood, archetypes } }
}

fn junk_rows(spec: &SynthSpec, tweets: &[RawTweet], rng: &mut ChaCha8Rng) -> Vec<(usize, String)> {
    let schema = TweetSchema::default();
    let per_kind = ((spec.junk_share * tweets.len() as f64) / 3.0).round() as usize;
    let mut junk = Vec::new();
    for k in 0..3 * per_kind {
        let after = rng.random_range(0..tweets.len());
        let row = match k % 3 {
            0 => serialize_tweet_row(&tweets[rng.random_range(0..=after)], &schema),
            1 => {
                let mut t = tweets[after].clone();
                t.id = format!("{}", 940_000_000_000_000_000u64 + k as u64);
                t.timestamp = timestamp(NaiveDate::from_ymd_opt(2015, 6, 1).unwrap() + Days::new(rng.random_range(0..100)), rng.random_range(0..86_400));
                serialize_tweet_row(&t, &schema)
            }
            _ => format!("{};user0000;not-a-date;1;2;3;broken row", 930_000_000_000_000_000u64 + k as u64),
        };
        junk.push((after, row));
    }
    junk.sort_by_key(|(after, _)| *after);
    junk
}

impl SynthCorpus {
    /// The corpus in the default `;`-delimited schema, junk rows interleaved.
    pub fn tweets_csv(&self) -> String {
        let schema = TweetSchema::default();
        let mut s = header_line(&schema);
        s.push('\n');
        let mut junk = self.junk.iter().peekable();
        for (i, t) in self.tweets.iter().enumerate() {
            s.push_str(&serialize_tweet_row(t, &schema));
            s.push('\n');
            while let Some((_, row)) = junk.next_if(|(after, _)| *after == i) {
                s.push_str(row);
                s.push('\n');
            }
        }
        s
    }

    pub fn prices_csv(&self) -> String {
        let mut s = String::from("date,close\n");
        for b in &self.prices {
            s.push_str(&format!("{},{:.2}\n", b.date, b.close));
        }
        s
    }
}

/// Streams `n_rows` tweets with random users, timestamps in 2017–2018 and
/// texts drawn from a fixed pool, in the default schema.
pub fn write_bulk_corpus<W: Write>(w: W, n_rows: usize, seed: u64) -> io::Result<()> {
    let mut rng = seeded(derive_seed(seed, 3));
    let pool: Vec<String> = (0..1024)
        .map(|i| match i % 5 {
            0 => foreign_text(&mut rng),
            1 => english_text(&mut rng, Tone::Positive),
            2 => english_text(&mut rng, Tone::Negative),
            _ => english_text(&mut rng, Tone::Neutral),
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    let span = 2 * 365 * 86_400;
    let mut out = csv::WriterBuilder::new()
        .delimiter(b';')
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(io::BufWriter::with_capacity(1 << 20, w));
    out.write_record(header_line(&TweetSchema::default()).split(';'))?;
    let mut buf = [String::new(), String::new(), String::new(), String::new(), String::new(), String::new()];
    for i in 0..n_rows {
        let ts = DateTime::from_timestamp(start + rng.random_range(0..span), 0).unwrap();
        buf[0] = (900_000_000_000_000_000u64 + i as u64).to_string();
        buf[1] = format!("user{:05}", rng.random_range(0..20_000));
        buf[2] = ts.format("%Y-%m-%dT%H:%M:%SZ").to_string();
        buf[3] = rng.random_range(0..5u32).to_string();
        buf[4] = rng.random_range(0..200u32).to_string();
        buf[5] = rng.random_range(0..50u32).to_string();
        let text = &pool[rng.random_range(0..pool.len())];
        out.write_record([buf[0].as_str(), &buf[1], &buf[2], &buf[3], &buf[4], &buf[5], text])?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{TweetStream, Window};
    use crate::nlp::SentimentLabel;

    fn small() -> SynthSpec {
        SynthSpec { n_tweets: 1500, n_days: 60, n_users: 60, ..SynthSpec::default() }
    }

    #[test]
    fn templates_realize_intended_labels() {
        let nlp = TextPipeline::english();
        let mut rng = seeded(5);
        for (tone, want) in [(Tone::Positive, SentimentLabel::Positive), (Tone::Negative, SentimentLabel::Negative), (Tone::Neutral, SentimentLabel::Neutral)] {
            let hits = (0..300).filter(|_| nlp.label_if_accepted(&english_text(&mut rng, tone)) == Some(want)).count();
            assert!(hits >= 270, "{tone:?}: {hits}/300");
        }
        let rejected = (0..300).filter(|_| nlp.label_if_accepted(&foreign_text(&mut rng)).is_none()).count();
        assert!(rejected >= 285, "{rejected}/300");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&small());
        assert_eq!(a, generate(&small()));
        let b = generate(&SynthSpec { seed: 7, ..small() });
        assert_ne!(a.tweets, b.tweets);
    }

    #[test]
    fn ingest_drops_exactly_the_junk() {
        let c = generate(&small());
        let csv = c.tweets_csv();
        let mut stream = TweetStream::from_reader(csv.as_bytes(), &TweetSchema::default(), Window::default()).unwrap();
        let kept: Vec<RawTweet> = stream.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(kept, c.tweets);
        let s = stream.stats();
        assert_eq!(s.rows_read as usize, c.tweets.len() + c.junk.len());
        assert!(s.rows_duplicate > 0 && s.rows_out_of_window > 0 && s.rows_malformed > 0);
    }

    #[test]
    fn prices_follow_planted_relation() {
        let c = generate(&SynthSpec { noise_sd: 1e-9, ..small() });
        let agg = aggregate_corpus(&c.tweets, &TextPipeline::english());
        let rows = crate::features::join_prices_and_label(agg.daily, &c.prices).unwrap();
        for r in &rows {
            let want = c.truth.expected_next_close(r).unwrap();
            // only the two-decimal rounding of the stored close separates them
            assert!((r.price.unwrap().next_close.unwrap() - want).abs() <= 0.0051);
        }
    }

    #[test]
    fn bulk_corpus_parses() {
        let mut buf = Vec::new();
        write_bulk_corpus(&mut buf, 500, 1).unwrap();
        let stream = TweetStream::from_reader(buf.as_slice(), &TweetSchema::default(), Window::default()).unwrap();
        assert_eq!(stream.filter(Result::is_ok).count(), 500);
    }
}
