//! Language identification from stopword hits and character-trigram profiles.
//!
//! For every known language the detector computes
//! `w * stopword_ratio + (1 - w) * cosine(trigrams(text), profile)` and reports
//! the best language if that score reaches the accept threshold, `"und"`
//! otherwise.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize::is_noise_chunk;

pub const UNDETERMINED: &str = "und";
pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 0.25;
pub const DEFAULT_STOPWORD_WEIGHT: f64 = 0.6;
/// Trigrams kept per language profile.
pub const PROFILE_SIZE: usize = 300;
/// Word-boundary padding character inside trigrams.
pub const PAD: char = '_';

const BUNDLED_PROFILES: &[(&str, &str)] = &[
    ("en", include_str!("../../data/profiles/en.tsv")),
    ("es", include_str!("../../data/profiles/es.tsv")),
    ("fr", include_str!("../../data/profiles/fr.tsv")),
    ("de", include_str!("../../data/profiles/de.tsv")),
    ("it", include_str!("../../data/profiles/it.tsv")),
    ("pt", include_str!("../../data/profiles/pt.tsv")),
    ("nl", include_str!("../../data/profiles/nl.tsv")),
];

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("profile has no language code")]
    MissingCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    pub lang: String,
    pub confidence: f64,
}

impl LanguageVerdict {
    pub fn undetermined(confidence: f64) -> Self {
        Self { lang: UNDETERMINED.to_string(), confidence }
    }

    pub fn is(&self, code: &str) -> bool {
        self.lang == code
    }
}

/// Calls `f` with each lowercase alphabetic word of `text`, skipping URLs,
/// mentions and emoticons.
pub fn for_each_word(text: &str, mut f: impl FnMut(&str)) {
    let mut cur = String::with_capacity(32);
    let mut flush = |cur: &mut String| {
        if !cur.is_empty() {
            f(cur);
            cur.clear();
        }
    };
    for chunk in text.split_whitespace().filter(|c| !is_noise_chunk(c)) {
        for c in chunk.chars() {
            if c.is_ascii() {
                if c.is_ascii_alphabetic() {
                    cur.push(c.to_ascii_lowercase());
                } else {
                    flush(&mut cur);
                }
                continue;
            }
            for lc in c.to_lowercase() {
                if lc.is_alphabetic() {
                    cur.push(lc);
                } else {
                    flush(&mut cur);
                }
            }
        }
        flush(&mut cur);
    }
}

/// Lowercase alphabetic words of `text`, skipping URLs, mentions and emoticons.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for_each_word(text, |w| out.push(w.to_string()));
    out
}

/// Character trigrams of `_word_`.
pub fn word_trigrams(word: &str, mut emit: impl FnMut([char; 3])) {
    if word.is_ascii() {
        let b = word.as_bytes();
        let at = |i: usize| if i == 0 || i > b.len() { PAD } else { char::from(b[i - 1]) };
        for i in 0..b.len() {
            emit([at(i), at(i + 1), at(i + 2)]);
        }
        return;
    }
    let mut a = PAD;
    let mut b: Option<char> = None;
    for c in word.chars().chain(std::iter::once(PAD)) {
        if let Some(bb) = b {
            emit([a, bb, c]);
            a = bb;
        }
        b = Some(c);
    }
}

#[inline]
fn key(t: [char; 3]) -> u64 {
    (u64::from(t[0] as u32) << 42) | (u64::from(t[1] as u32) << 21) | u64::from(t[2] as u32)
}

/// One language: stopword list plus trigram frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageProfile {
    pub code: String,
    pub stopwords: Vec<String>,
    /// Trigram text (with `_` padding) and its count, most frequent first.
    pub trigrams: Vec<(String, u64)>,
}

impl LanguageProfile {
    /// Builds a profile from sample text, keeping the `top_n` most frequent
    /// trigrams (ties broken by trigram text).
    pub fn from_sample(code: &str, sample: &str, stopwords: &[String], top_n: usize) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for w in words(sample) {
            word_trigrams(&w, |t| *counts.entry(t.iter().collect()).or_default() += 1);
        }
        let mut trigrams: Vec<(String, u64)> = counts.into_iter().collect();
        trigrams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        trigrams.truncate(top_n);
        let mut stop: Vec<String> = stopwords.iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        stop.sort();
        stop.dedup();
        Self { code: code.to_string(), stopwords: stop, trigrams }
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut code = None;
        let mut stopwords = Vec::new();
        let mut trigrams = Vec::new();
        let mut section = "";
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| ProfileError::Line { line: i + 1, reason: reason.to_string() };
            if line.starts_with('[') {
                section = match line {
                    "[stopwords]" => "stopwords",
                    "[trigrams]" => "trigrams",
                    _ => return Err(err("unknown section")),
                };
                continue;
            }
            match section {
                "" => {
                    let (k, v) = line.split_once('\t').ok_or_else(|| err("expected key<TAB>value"))?;
                    if k == "lang" {
                        code = Some(v.trim().to_string());
                    }
                }
                "stopwords" => stopwords.push(line.trim().to_lowercase()),
                _ => {
                    let (t, c) = line.split_once('\t').ok_or_else(|| err("expected trigram<TAB>count"))?;
                    if t.chars().count() != 3 {
                        return Err(err("trigram must have three characters"));
                    }
                    let c: u64 = c.trim().parse().map_err(|_| err("bad count"))?;
                    trigrams.push((t.to_string(), c));
                }
            }
        }
        Ok(Self { code: code.ok_or(ProfileError::MissingCode)?, stopwords, trigrams })
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("# character trigram profile; `{PAD}` marks a word boundary\nlang\t{}\n[stopwords]\n", self.code);
        for w in &self.stopwords {
            s.push_str(w);
            s.push('\n');
        }
        s.push_str("[trigrams]\n");
        for (t, c) in &self.trigrams {
            s.push_str(&format!("{t}\t{c}\n"));
        }
        s
    }
}

pub fn bundled_profiles() -> Vec<LanguageProfile> {
    BUNDLED_PROFILES
        .iter()
        .map(|(_, text)| LanguageProfile::parse(text).expect("bundled profile parses"))
        .collect()
}

/// English stopwords from the bundled profile.
pub fn english_stopwords() -> HashSet<String> {
    let en = LanguageProfile::parse(BUNDLED_PROFILES[0].1).expect("bundled profile parses");
    en.stopwords.into_iter().collect()
}

/// Per-thread buffers reused across calls. `counts` is all zero between calls.
#[derive(Default)]
struct Scratch {
    counts: Vec<u32>,
    seen: Vec<u32>,
    unknown: Vec<u64>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::default();
}

#[derive(Debug, Clone)]
pub struct LanguageDetector {
    codes: Vec<String>,
    /// Per trigram, its row in `weights`.
    rows: FxHashMap<u64, u32>,
    /// Row-major, one row per known trigram: its weight in each language's
    /// unit-normalized profile.
    weights: Vec<f32>,
    /// Per stopword, bitmask of languages listing it.
    stopwords: FxHashMap<String, u64>,
    accept_threshold: f64,
    stopword_weight: f64,
}

impl Default for LanguageDetector {
    fn default() -> Self {
        Self::new(bundled_profiles(), DEFAULT_ACCEPT_THRESHOLD, DEFAULT_STOPWORD_WEIGHT)
    }
}

impl LanguageDetector {
    /// At most 64 profiles are supported.
    pub fn new(profiles: Vec<LanguageProfile>, accept_threshold: f64, stopword_weight: f64) -> Self {
        assert!(profiles.len() <= 64, "at most 64 language profiles");
        let n = profiles.len();
        let mut rows: FxHashMap<u64, u32> = FxHashMap::default();
        let mut weights: Vec<f32> = Vec::new();
        let mut stopwords: FxHashMap<String, u64> = FxHashMap::default();
        for (l, p) in profiles.iter().enumerate() {
            let norm = p.trigrams.iter().map(|(_, c)| (*c as f64).powi(2)).sum::<f64>().sqrt();
            for (t, c) in &p.trigrams {
                let mut chars = t.chars();
                let tri = [chars.next().unwrap(), chars.next().unwrap(), chars.next().unwrap()];
                let next = rows.len() as u32;
                let row = *rows.entry(key(tri)).or_insert_with(|| {
                    weights.resize(weights.len() + n, 0.0);
                    next
                }) as usize;
                weights[row * n + l] = (*c as f64 / norm) as f32;
            }
            for w in &p.stopwords {
                *stopwords.entry(w.clone()).or_default() |= 1 << l;
            }
        }
        Self {
            codes: profiles.into_iter().map(|p| p.code).collect(),
            rows,
            weights,
            stopwords,
            accept_threshold,
            stopword_weight: stopword_weight.clamp(0.0, 1.0),
        }
    }

    pub fn with_thresholds(mut self, accept_threshold: f64, stopword_weight: f64) -> Self {
        self.accept_threshold = accept_threshold;
        self.stopword_weight = stopword_weight.clamp(0.0, 1.0);
        self
    }

    pub fn languages(&self) -> &[String] {
        &self.codes
    }

    pub fn accept_threshold(&self) -> f64 {
        self.accept_threshold
    }

    /// Score for every known language, in profile order.
    pub fn scores(&self, text: &str) -> Vec<(String, f64)> {
        let raw = self.raw_scores(text);
        self.codes.iter().enumerate().map(|(l, c)| (c.clone(), raw.as_ref().map_or(0.0, |r| r[l]))).collect()
    }

    /// `None` when the text has no words.
    fn raw_scores(&self, text: &str) -> Option<Vec<f64>> {
        SCRATCH.with_borrow_mut(|scratch| self.raw_scores_with(text, scratch))
    }

    fn raw_scores_with(&self, text: &str, scratch: &mut Scratch) -> Option<Vec<f64>> {
        let n = self.codes.len();
        let mut hits = vec![0usize; n];
        if scratch.counts.len() < self.rows.len() {
            scratch.counts.resize(self.rows.len(), 0);
        }
        let Scratch { counts, seen, unknown } = scratch;
        seen.clear();
        unknown.clear();
        let mut sq = 0f64;
        let mut total = 0usize;
        for_each_word(text, |w| {
            total += 1;
            if let Some(mask) = self.stopwords.get(w) {
                for (l, h) in hits.iter_mut().enumerate() {
                    if mask & (1 << l) != 0 {
                        *h += 1;
                    }
                }
            }
            word_trigrams(w, |t| {
                let k = key(t);
                match self.rows.get(&k) {
                    Some(&row) => {
                        let c = &mut counts[row as usize];
                        if *c == 0 {
                            seen.push(row);
                        }
                        // (c + 1)² − c²
                        sq += f64::from(2 * *c + 1);
                        *c += 1;
                    }
                    None => unknown.push(k),
                }
            });
        });
        let mut dots = vec![0f64; n];
        for &row in seen.iter() {
            let count = f64::from(std::mem::take(&mut counts[row as usize]));
            let ws = &self.weights[row as usize * n..(row as usize + 1) * n];
            for (d, w) in dots.iter_mut().zip(ws) {
                *d += count * f64::from(*w);
            }
        }
        if total == 0 {
            return None;
        }
        unknown.sort_unstable();
        for run in unknown.chunk_by(|a, b| a == b) {
            sq += (run.len() as f64).powi(2);
        }
        let norm = sq.sqrt();
        let w = self.stopword_weight;
        Some(
            (0..n)
                .map(|l| {
                    let cos = if norm > 0.0 { (dots[l] / norm).clamp(0.0, 1.0) } else { 0.0 };
                    (w * hits[l] as f64 / total as f64 + (1.0 - w) * cos).clamp(0.0, 1.0)
                })
                .collect(),
        )
    }

    pub fn detect(&self, text: &str) -> LanguageVerdict {
        let Some(scores) = self.raw_scores(text) else {
            return LanguageVerdict::undetermined(0.0);
        };
        let mut best: Option<(usize, f64)> = None;
        for (l, &s) in scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((l, s));
            }
        }
        match best {
            Some((l, s)) if s >= self.accept_threshold => LanguageVerdict { lang: self.codes[l].clone(), confidence: s },
            Some((_, s)) => LanguageVerdict::undetermined(s),
            None => LanguageVerdict::undetermined(0.0),
        }
    }
}

/// Per-language verdict counts over many texts.
pub fn language_histogram<'a>(detector: &LanguageDetector, texts: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for t in texts {
        *h.entry(detector.detect(t).lang).or_default() += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn english_sentence() {
        let v = LanguageDetector::default().detect("the price of the bitcoin is on the rise");
        assert_eq!(v.lang, "en");
        assert!(v.confidence >= DEFAULT_ACCEPT_THRESHOLD);
    }

    #[test]
    fn spanish_is_not_english() {
        let v = LanguageDetector::default().detect("el precio de bitcoin sube mucho hoy");
        assert_ne!(v.lang, "en");
    }

    #[test]
    fn empty_is_undetermined() {
        assert_eq!(LanguageDetector::default().detect(""), LanguageVerdict::undetermined(0.0));
        assert_eq!(LanguageDetector::default().detect("   \t"), LanguageVerdict::undetermined(0.0));
        assert_eq!(LanguageDetector::default().detect("12345 !!! 😀").lang, UNDETERMINED);
    }

    #[test]
    fn und_iff_below_threshold() {
        let det = LanguageDetector::default();
        for t in ["hello", "bitcoin", "the market is going up and we are all happy", "xkcd qwrt"] {
            let v = det.detect(t);
            assert_eq!(v.lang == UNDETERMINED, v.confidence < det.accept_threshold(), "{t}: {v:?}");
            assert!((0.0..=1.0).contains(&v.confidence));
        }
    }

    #[test]
    fn profile_round_trips() {
        for p in bundled_profiles() {
            assert_eq!(LanguageProfile::parse(&p.to_tsv()).unwrap(), p);
            assert!(p.trigrams.len() <= PROFILE_SIZE);
        }
    }

    proptest! {
        #[test]
        fn bag_equal_texts_score_identically(perm in Just(vec!["the", "price", "of", "bitcoin", "is", "going", "up", "today"]).prop_shuffle()) {
            let det = LanguageDetector::default();
            let a = det.scores("the price of bitcoin is going up today");
            let b = det.scores(&perm.join(" "));
            for ((ca, sa), (cb, sb)) in a.iter().zip(&b) {
                prop_assert_eq!(ca, cb);
                prop_assert!((sa - sb).abs() < 1e-12);
            }
        }
    }
}
