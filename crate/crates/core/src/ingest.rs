//! Streaming ingestion of the tweet corpus and the daily price series.
//!
//! The corpus is delimited text with a header row and RFC-4180 quoting (the
//! Kaggle export uses `;`). Rows are parsed lazily; malformed, duplicate and
//! out-of-window rows are dropped and counted in [`CorpusStats`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader, Read, Seek, SeekFrom};
use std::ops::{AddAssign, Range};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("header mismatch: column {column:?} not found in header")]
    HeaderMismatch { column: String },
    #[error("malformed price row {line}: {reason}")]
    MalformedPrice { line: usize, reason: String },
    #[error("non-positive close {close} on {date}")]
    NonPositivePrice { date: NaiveDate, close: f64 },
    #[error("duplicate price date {0}")]
    DuplicateDate(NaiveDate),
    #[error("price series needs at least 2 rows, got {0}")]
    TooFewPrices(usize),
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => IngestError::Io(io),
                other => IngestError::Csv(format!("{other:?}")),
            }
        } else {
            IngestError::Csv(e.to_string())
        }
    }
}

/// Per-row parse failure. Each variant carries the offending column name.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RowError {
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("unparsable number in column {0}")]
    UnparsableNumber(String),
    #[error("unparsable timestamp in column {0}")]
    UnparsableTimestamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    #[default]
    Iso8601,
    EpochSeconds,
}

/// Maps every [`RawTweet`] field to a header column name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TweetSchema {
    pub id: String,
    pub username: String,
    pub timestamp: String,
    pub replies: String,
    pub likes: String,
    pub retweets: String,
    pub text: String,
    pub timestamp_format: TimestampFormat,
    pub delimiter: char,
}

impl Default for TweetSchema {
    /// Column names of the Kaggle bitcoin-tweets export.
    fn default() -> Self {
        Self {
            id: "id".into(),
            username: "user".into(),
            timestamp: "timestamp".into(),
            replies: "replies".into(),
            likes: "likes".into(),
            retweets: "retweets".into(),
            text: "text".into(),
            timestamp_format: TimestampFormat::Iso8601,
            delimiter: ';',
        }
    }
}

impl TweetSchema {
    fn delimiter_byte(&self) -> u8 {
        u8::try_from(self.delimiter).unwrap_or(b';')
    }

    fn names(&self) -> [&str; 7] {
        [&self.id, &self.username, &self.timestamp, &self.replies, &self.likes, &self.retweets, &self.text]
    }

    /// Resolves column names against a header row.
    pub fn resolve<'a, I>(&self, header: I) -> Result<ColumnIndex, IngestError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let header: Vec<&str> = header.into_iter().map(|h| h.trim()).collect();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| IngestError::HeaderMismatch { column: name.to_string() })
        };
        let [id, user, ts, rep, lik, ret, txt] = self.names();
        Ok(ColumnIndex {
            id: find(id)?,
            username: find(user)?,
            timestamp: find(ts)?,
            replies: find(rep)?,
            likes: find(lik)?,
            retweets: find(ret)?,
            text: find(txt)?,
            names: self.names().map(str::to_string),
            timestamp_format: self.timestamp_format,
        })
    }
}

/// Header positions of each field, resolved once per file.
#[derive(Debug, Clone)]
pub struct ColumnIndex {
    id: usize,
    username: usize,
    timestamp: usize,
    replies: usize,
    likes: usize,
    retweets: usize,
    text: usize,
    names: [String; 7],
    timestamp_format: TimestampFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTweet {
    pub id: String,
    pub username: String,
    pub timestamp: DateTime<Utc>,
    pub replies: u64,
    pub likes: u64,
    pub retweets: u64,
    pub text: String,
}

impl RawTweet {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    pub fn hour(&self) -> u32 {
        self.timestamp.hour()
    }

    /// 0 = Monday … 6 = Sunday.
    pub fn weekday_index(&self) -> usize {
        self.timestamp.weekday().num_days_from_monday() as usize
    }
}

/// Inclusive range of UTC calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2019, 3, 29).unwrap(),
        }
    }
}

impl Window {
    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub rows_duplicate: u64,
    pub rows_out_of_window: u64,
    pub rows_kept: u64,
}

impl CorpusStats {
    pub fn is_consistent(&self) -> bool {
        self.rows_read == self.rows_malformed + self.rows_duplicate + self.rows_out_of_window + self.rows_kept
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, o: Self) {
        self.rows_read += o.rows_read;
        self.rows_malformed += o.rows_malformed;
        self.rows_duplicate += o.rows_duplicate;
        self.rows_out_of_window += o.rows_out_of_window;
        self.rows_kept += o.rows_kept;
    }
}

fn field<'r>(rec: &'r csv::ByteRecord, idx: usize, name: &str) -> Result<&'r [u8], RowError> {
    rec.get(idx).ok_or_else(|| RowError::MissingColumn(name.to_string()))
}

fn parse_count(raw: &[u8], name: &str) -> Result<u64, RowError> {
    let raw = trim_ascii(raw);
    if raw.is_empty() || raw.len() > 19 {
        return Err(RowError::UnparsableNumber(name.to_string()));
    }
    let mut v: u64 = 0;
    for &b in raw {
        if !b.is_ascii_digit() {
            return Err(RowError::UnparsableNumber(name.to_string()));
        }
        v = v * 10 + u64::from(b - b'0');
    }
    Ok(v)
}

fn trim_ascii(mut s: &[u8]) -> &[u8] {
    while let [first, rest @ ..] = s {
        if first.is_ascii_whitespace() {
            s = rest;
        } else {
            break;
        }
    }
    while let [rest @ .., last] = s {
        if last.is_ascii_whitespace() {
            s = rest;
        } else {
            break;
        }
    }
    s
}

fn digits(s: &[u8]) -> Option<u32> {
    let mut v = 0u32;
    for &b in s {
        if !b.is_ascii_digit() {
            return None;
        }
        v = v * 10 + u32::from(b - b'0');
    }
    Some(v)
}

/// Parses `YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|±HH[:MM]]`, normalized to UTC and
/// truncated to whole seconds.
pub fn parse_iso_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let b = s.trim().as_bytes();
    if b.len() >= 19 && b[4] == b'-' && b[7] == b'-' && (b[10] == b'T' || b[10] == b' ') && b[13] == b':' && b[16] == b':' {
        let date = NaiveDate::from_ymd_opt(digits(&b[0..4])? as i32, digits(&b[5..7])?, digits(&b[8..10])?)?;
        let naive = date.and_hms_opt(digits(&b[11..13])?, digits(&b[14..16])?, digits(&b[17..19])?)?;
        let mut rest = &b[19..];
        if let [b'.', tail @ ..] = rest {
            let n = tail.iter().take_while(|c| c.is_ascii_digit()).count();
            if n == 0 {
                return None;
            }
            rest = &tail[n..];
        }
        let offset_secs: i64 = match rest {
            [] | [b'Z'] | [b'z'] => 0,
            [sign @ (b'+' | b'-'), tail @ ..] => {
                let (h, m) = match tail {
                    [h1, h2] => (digits(&[*h1, *h2])?, 0),
                    [h1, h2, m1, m2] => (digits(&[*h1, *h2])?, digits(&[*m1, *m2])?),
                    [h1, h2, b':', m1, m2] => (digits(&[*h1, *h2])?, digits(&[*m1, *m2])?),
                    _ => return None,
                };
                if h > 23 || m > 59 {
                    return None;
                }
                let secs = i64::from(h * 3600 + m * 60);
                if *sign == b'-' { -secs } else { secs }
            }
            _ => return None,
        };
        return Some(Utc.from_utc_datetime(&naive) - Duration::seconds(offset_secs));
    }
    // Date-only values and other layouts chrono understands.
    if let Ok(d) = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d") {
        return Some(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0)?));
    }
    DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|d| d.with_timezone(&Utc).with_nanosecond(0).unwrap())
        .or_else(|| {
            NaiveDateTime::parse_from_str(s.trim(), "%Y/%m/%d %H:%M:%S")
                .ok()
                .map(|n| Utc.from_utc_datetime(&n))
        })
}

fn parse_timestamp(raw: &[u8], fmt: TimestampFormat, name: &str) -> Result<DateTime<Utc>, RowError> {
    let err = || RowError::UnparsableTimestamp(name.to_string());
    let s = std::str::from_utf8(raw).map_err(|_| err())?;
    match fmt {
        TimestampFormat::Iso8601 => parse_iso_timestamp(s).ok_or_else(err),
        TimestampFormat::EpochSeconds => {
            let secs: i64 = s.trim().parse().map_err(|_| err())?;
            Utc.timestamp_opt(secs, 0).single().ok_or_else(err)
        }
    }
}

fn lossy(raw: &[u8]) -> String {
    String::from_utf8_lossy(raw).into_owned()
}

impl ColumnIndex {
    /// Parses one record into a [`RawTweet`].
    pub fn parse(&self, rec: &csv::ByteRecord) -> Result<RawTweet, RowError> {
        let [n_id, n_user, n_ts, n_rep, n_lik, n_ret, n_txt] = &self.names;
        Ok(RawTweet {
            id: lossy(field(rec, self.id, n_id)?),
            username: lossy(field(rec, self.username, n_user)?),
            timestamp: parse_timestamp(field(rec, self.timestamp, n_ts)?, self.timestamp_format, n_ts)?,
            replies: parse_count(field(rec, self.replies, n_rep)?, n_rep)?,
            likes: parse_count(field(rec, self.likes, n_lik)?, n_lik)?,
            retweets: parse_count(field(rec, self.retweets, n_ret)?, n_ret)?,
            text: lossy(field(rec, self.text, n_txt)?),
        })
    }

    fn id_of<'r>(&self, rec: &'r csv::ByteRecord) -> &'r [u8] {
        rec.get(self.id).unwrap_or_default()
    }
}

fn reader_builder(delimiter: u8, has_headers: bool) -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.delimiter(delimiter).has_headers(has_headers).flexible(true).quoting(true).double_quote(true);
    b
}

/// Parses a single delimited record against a header line.
pub fn parse_tweet_row(header: &str, line: &str, schema: &TweetSchema) -> Result<RawTweet, RowError> {
    let d = schema.delimiter_byte();
    let mut hr = reader_builder(d, false).from_reader(header.as_bytes());
    let mut hrec = csv::StringRecord::new();
    hr.read_record(&mut hrec).map_err(|_| RowError::MissingColumn(schema.id.clone()))?;
    let cols = schema.resolve(hrec.iter()).map_err(|e| match e {
        IngestError::HeaderMismatch { column } => RowError::MissingColumn(column),
        _ => RowError::MissingColumn(schema.id.clone()),
    })?;
    let mut rr = reader_builder(d, false).from_reader(line.as_bytes());
    let mut rec = csv::ByteRecord::new();
    match rr.read_byte_record(&mut rec) {
        Ok(true) => cols.parse(&rec),
        _ => Err(RowError::MissingColumn(schema.id.clone())),
    }
}

/// Writes a header line for `schema` in field order.
pub fn header_line(schema: &TweetSchema) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(schema.delimiter_byte()).from_writer(vec![]);
    w.write_record(schema.names()).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8").trim_end().to_string()
}

/// Serializes a tweet as one record whose columns follow [`header_line`].
pub fn serialize_tweet_row(t: &RawTweet, schema: &TweetSchema) -> String {
    let ts = match schema.timestamp_format {
        TimestampFormat::Iso8601 => t.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        TimestampFormat::EpochSeconds => t.timestamp.timestamp().to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte())
        .quote_style(csv::QuoteStyle::Necessary)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record([
        t.id.as_str(),
        t.username.as_str(),
        ts.as_str(),
        &t.replies.to_string(),
        &t.likes.to_string(),
        &t.retweets.to_string(),
        t.text.as_str(),
    ])
    .expect("in-memory write");
    let mut s = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8");
    s.pop();
    s
}

/// A malformed row kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFailure {
    pub record: u64,
    pub error: RowError,
}

const MAX_FAILURES_KEPT: usize = 32;

enum Dedup {
    Seen(FxHashSet<Box<[u8]>>),
    /// Ordinals (among well-formed rows of this shard) already known to be duplicates.
    Excluded(HashSet<u64>),
}

/// Lazy, single-pass stream of in-window, de-duplicated tweets.
pub struct TweetStream<R: Read> {
    reader: csv::Reader<R>,
    cols: ColumnIndex,
    window: Window,
    dedup: Dedup,
    record: csv::ByteRecord,
    stats: CorpusStats,
    well_formed: u64,
    failures: Vec<RowFailure>,
}

impl TweetStream<BufReader<File>> {
    /// Opens a corpus file. Fails if the header lacks a schema column.
    pub fn open(path: &Path, schema: &TweetSchema, window: Window) -> Result<Self, IngestError> {
        let f = BufReader::with_capacity(1 << 16, File::open(path)?);
        Self::from_reader(f, schema, window)
    }
}

impl<R: Read> TweetStream<R> {
    pub fn from_reader(r: R, schema: &TweetSchema, window: Window) -> Result<Self, IngestError> {
        let mut reader = reader_builder(schema.delimiter_byte(), true).from_reader(r);
        let header = reader.byte_headers()?.clone();
        let names: Vec<String> = header.iter().map(lossy).collect();
        let cols = schema.resolve(names.iter().map(String::as_str))?;
        Ok(Self::with_columns(reader, cols, window, Dedup::Seen(FxHashSet::default())))
    }

    fn with_columns(reader: csv::Reader<R>, cols: ColumnIndex, window: Window, dedup: Dedup) -> Self {
        Self {
            reader,
            cols,
            window,
            dedup,
            record: csv::ByteRecord::new(),
            stats: CorpusStats::default(),
            well_formed: 0,
            failures: Vec::new(),
        }
    }

    /// Counters so far; final once the stream is exhausted.
    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    /// The first few malformed rows, for diagnostics.
    pub fn failures(&self) -> &[RowFailure] {
        &self.failures
    }

    fn note_failure(&mut self, error: RowError) {
        self.stats.rows_malformed += 1;
        if self.failures.len() < MAX_FAILURES_KEPT {
            self.failures.push(RowFailure { record: self.stats.rows_read, error });
        }
    }
}

impl<R: Read> Iterator for TweetStream<R> {
    type Item = Result<RawTweet, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.reader.read_byte_record(&mut self.record) {
                Ok(false) => return None,
                Ok(true) => {}
                Err(e) if e.is_io_error() => return Some(Err(e.into())),
                Err(_) => {
                    // Invalid quoting or encoding: count and move on.
                    self.stats.rows_read += 1;
                    self.note_failure(RowError::MissingColumn(self.cols.names[6].clone()));
                    continue;
                }
            }
            self.stats.rows_read += 1;
            let tweet = match self.cols.parse(&self.record) {
                Ok(t) => t,
                Err(e) => {
                    self.note_failure(e);
                    continue;
                }
            };
            let ordinal = self.well_formed;
            self.well_formed += 1;
            let duplicate = match &mut self.dedup {
                Dedup::Seen(seen) => !seen.insert(self.cols.id_of(&self.record).into()),
                Dedup::Excluded(ex) => ex.contains(&ordinal),
            };
            if duplicate {
                self.stats.rows_duplicate += 1;
                continue;
            }
            if !self.window.contains(tweet.date()) {
                self.stats.rows_out_of_window += 1;
                continue;
            }
            self.stats.rows_kept += 1;
            return Some(Ok(tweet));
        }
    }
}

/// Convenience wrapper: opens `path` as a [`TweetStream`].
pub fn stream_corpus(path: &Path, schema: &TweetSchema, window: Window) -> Result<TweetStream<BufReader<File>>, IngestError> {
    TweetStream::open(path, schema, window)
}

// ---------------------------------------------------------------------------
// Sharding
// ---------------------------------------------------------------------------

/// Byte ranges of a corpus file, each starting and ending on a record
/// boundary, plus the resolved header.
#[derive(Debug, Clone)]
pub struct ShardPlan {
    pub ranges: Vec<Range<u64>>,
    cols: ColumnIndex,
    delimiter: u8,
}

impl ShardPlan {
    /// Splits the body of `path` into at most `shards` ranges. Boundaries are
    /// found with a quote-aware scan so embedded newlines never split a record.
    pub fn new(path: &Path, schema: &TweetSchema, shards: usize) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path)?;
        let mut in_quotes = false;
        let mut boundaries = Vec::new();
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                b'"' => in_quotes = !in_quotes,
                b'\n' if !in_quotes => boundaries.push(i as u64 + 1),
                _ => {}
            }
        }
        let len = bytes.len() as u64;
        let body_start = boundaries.first().copied().unwrap_or(len);
        let header_text = String::from_utf8_lossy(&bytes[..body_start as usize]).into_owned();
        let mut hr = reader_builder(schema.delimiter_byte(), false).from_reader(header_text.as_bytes());
        let mut hrec = csv::StringRecord::new();
        hr.read_record(&mut hrec)?;
        let cols = schema.resolve(hrec.iter())?;

        let shards = shards.max(1) as u64;
        let body_len = len - body_start;
        let mut ranges = Vec::new();
        let mut start = body_start;
        for s in 1..=shards {
            let target = body_start + body_len * s / shards;
            let end = if s == shards {
                len
            } else {
                // first record boundary at or after target
                match boundaries.binary_search(&target) {
                    Ok(i) => boundaries[i],
                    Err(i) => boundaries.get(i).copied().unwrap_or(len),
                }
            };
            if end > start {
                ranges.push(start..end);
                start = end;
            }
        }
        Ok(Self { ranges, cols, delimiter: schema.delimiter_byte() })
    }

    fn open_range(&self, path: &Path, shard: usize) -> Result<csv::Reader<io::Take<BufReader<File>>>, IngestError> {
        let r = &self.ranges[shard];
        let mut f = File::open(path)?;
        f.seek(SeekFrom::Start(r.start))?;
        let take = BufReader::with_capacity(1 << 16, f).take(r.end - r.start);
        Ok(reader_builder(self.delimiter, false).from_reader(take))
    }

    /// Ids of well-formed rows in shard order (first pass of global dedup).
    fn shard_ids(&self, path: &Path, shard: usize) -> Result<Vec<Box<[u8]>>, IngestError> {
        let mut reader = self.open_range(path, shard)?;
        let mut rec = csv::ByteRecord::new();
        let mut ids = Vec::new();
        loop {
            match reader.read_byte_record(&mut rec) {
                Ok(false) => break,
                Ok(true) => {
                    if self.cols.parse(&rec).is_ok() {
                        ids.push(self.cols.id_of(&rec).into());
                    }
                }
                Err(e) if e.is_io_error() => return Err(e.into()),
                Err(_) => {}
            }
        }
        Ok(ids)
    }

    /// Computes, for every shard, the ordinals of rows that duplicate an id
    /// seen earlier in file order. Pass the result to [`ShardPlan::stream`].
    pub fn duplicate_ordinals(&self, path: &Path) -> Result<Vec<HashSet<u64>>, IngestError> {
        let per_shard: Vec<Vec<Box<[u8]>>> = crate::par::map_indexed(self.ranges.len(), |s| self.shard_ids(path, s))
            .into_iter()
            .collect::<Result<_, _>>()?;
        let mut seen: FxHashSet<&[u8]> = FxHashSet::default();
        Ok(per_shard
            .iter()
            .map(|ids| {
                ids.iter()
                    .enumerate()
                    .filter(|(_, id)| !seen.insert(&id[..]))
                    .map(|(i, _)| i as u64)
                    .collect()
            })
            .collect())
    }

    /// Streams one shard, dropping the given duplicate ordinals.
    pub fn stream(
        &self,
        path: &Path,
        shard: usize,
        window: Window,
        duplicates: HashSet<u64>,
    ) -> Result<TweetStream<io::Take<BufReader<File>>>, IngestError> {
        let reader = self.open_range(path, shard)?;
        Ok(TweetStream::with_columns(reader, self.cols.clone(), window, Dedup::Excluded(duplicates)))
    }
}

// ---------------------------------------------------------------------------
// Prices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub close: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    #[default]
    ForwardFill,
    Drop,
}

/// Validates, sorts and gap-fills price rows.
pub fn prepare_price_series(mut bars: Vec<PriceBar>, fill: FillPolicy) -> Result<Vec<PriceBar>, IngestError> {
    if bars.len() < 2 {
        return Err(IngestError::TooFewPrices(bars.len()));
    }
    for b in &bars {
        if !(b.close > 0.0) || !b.close.is_finite() {
            return Err(IngestError::NonPositivePrice { date: b.date, close: b.close });
        }
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(IngestError::DuplicateDate(w[0].date));
    }
    if fill == FillPolicy::Drop {
        return Ok(bars);
    }
    let mut out = Vec::with_capacity(bars.len());
    for b in bars {
        if let Some(&prev) = out.last() {
            let prev: PriceBar = prev;
            let mut d = prev.date.succ_opt().expect("date overflow");
            while d < b.date {
                out.push(PriceBar { date: d, close: prev.close });
                d = d.succ_opt().expect("date overflow");
            }
        }
        out.push(b);
    }
    Ok(out)
}

/// Reads a `date,close` series (extra columns ignored, names case-insensitive).
pub fn read_price_series<R: Read>(r: R, delimiter: u8, fill: FillPolicy) -> Result<Vec<PriceBar>, IngestError> {
    let mut reader = reader_builder(delimiter, true).from_reader(r);
    let header = reader.headers()?.clone();
    let pos = |name: &str| {
        header
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::HeaderMismatch { column: name.to_string() })
    };
    let (di, ci) = (pos("date")?, pos("close")?);
    let mut bars = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |reason: &str| IngestError::MalformedPrice { line, reason: reason.to_string() };
        let ds = rec.get(di).ok_or_else(|| bad("missing date"))?.trim();
        let date = NaiveDate::parse_from_str(ds, "%Y-%m-%d")
            .or_else(|_| parse_iso_timestamp(ds).map(|t| t.date_naive()).ok_or(()))
            .map_err(|_| bad("unparsable date"))?;
        let close: f64 = rec
            .get(ci)
            .ok_or_else(|| bad("missing close"))?
            .trim()
            .parse()
            .map_err(|_| bad("unparsable close"))?;
        bars.push(PriceBar { date, close });
    }
    prepare_price_series(bars, fill)
}

pub fn load_price_series(path: &Path, delimiter: u8, fill: FillPolicy) -> Result<Vec<PriceBar>, IngestError> {
    read_price_series(BufReader::new(File::open(path)?), delimiter, fill)
}
