//! Lexicon sentiment with negation and boosters, squashed into (-1, 1).

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;

/// Squashing constant in `raw / sqrt(raw² + α)`.
pub const NORMALIZATION_ALPHA: f64 = 15.0;
/// How many preceding tokens are searched for a negator.
pub const NEGATION_SCOPE: usize = 3;
pub const DEFAULT_NEUTRAL_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentLabel {
    Positive,
    Neutral,
    Negative,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [SentimentLabel::Positive, SentimentLabel::Negative, SentimentLabel::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Negative => "negative",
        }
    }

    /// Label for `score` given the neutral half-width `tau`.
    pub fn from_score(score: f64, tau: f64) -> Self {
        if score > tau {
            SentimentLabel::Positive
        } else if score < -tau {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub score: f64,
    pub label: SentimentLabel,
}

/// Unnormalized polarity: sum of lexicon hits, each sign-flipped when a
/// negator occurs within the previous [`NEGATION_SCOPE`] tokens and scaled by
/// the booster immediately before it. Negators and boosters never score
/// themselves.
pub fn raw_polarity<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> f64 {
    let mut raw = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if lexicon.is_negator(tok) || lexicon.booster(tok).is_some() {
            continue;
        }
        let Some(mut v) = lexicon.valence(tok) else { continue };
        let lo = i.saturating_sub(NEGATION_SCOPE);
        if tokens[lo..i].iter().any(|t| lexicon.is_negator(t.as_ref())) {
            v = -v;
        }
        if i > 0 {
            if let Some(m) = lexicon.booster(tokens[i - 1].as_ref()) {
                v *= m;
            }
        }
        raw += v;
    }
    raw
}

pub fn normalize(raw: f64) -> f64 {
    raw / (raw * raw + NORMALIZATION_ALPHA).sqrt()
}

/// Scores a token list. `tau` is the neutral-band half-width and must be positive.
pub fn score_sentiment<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon, tau: f64) -> SentimentResult {
    assert!(tau > 0.0, "neutral threshold must be positive");
    let score = normalize(raw_polarity(tokens, lexicon));
    SentimentResult { score, label: SentimentLabel::from_score(score, tau) }
}
