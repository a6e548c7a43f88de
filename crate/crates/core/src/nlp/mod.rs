//! Language identification, tweet cleaning, lexicon sentiment and term counts.

pub mod language;
pub mod lexicon;
pub mod sentiment;
pub mod terms;
pub mod tokenize;

pub use language::{LanguageDetector, LanguageProfile, LanguageVerdict};
pub use lexicon::Lexicon;
pub use sentiment::{score_sentiment, SentimentLabel, SentimentResult};
pub use terms::{term_frequencies, LabelFilter};
pub use tokenize::{clean_and_tokenize, Tokenizer};

/// Everything needed to turn raw tweet text into a language verdict and a
/// sentiment label. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub detector: LanguageDetector,
    pub lexicon: Lexicon,
    pub tokenizer: Tokenizer,
    pub neutral_threshold: f64,
    pub language: String,
}

/// Outcome for one tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAnalysis {
    pub verdict: LanguageVerdict,
    pub tokens: Vec<String>,
    pub sentiment: SentimentResult,
}

impl TextPipeline {
    pub fn new(detector: LanguageDetector, lexicon: Lexicon, neutral_threshold: f64, language: &str) -> Self {
        assert!(neutral_threshold > 0.0, "neutral threshold must be positive");
        let tokenizer = Tokenizer::new(lexicon.single_char_tokens());
        Self { detector, lexicon, tokenizer, neutral_threshold, language: language.to_string() }
    }

    /// English, bundled lexicon, default thresholds.
    pub fn english() -> Self {
        Self::new(LanguageDetector::default(), Lexicon::bundled().clone(), sentiment::DEFAULT_NEUTRAL_THRESHOLD, "en")
    }

    pub fn analyze(&self, text: &str) -> TextAnalysis {
        let verdict = self.detector.detect(text);
        let tokens = self.tokenizer.tokenize(text);
        let sentiment = score_sentiment(&tokens, &self.lexicon, self.neutral_threshold);
        TextAnalysis { verdict, tokens, sentiment }
    }

    /// Sentiment label if the text is in the accepted language, else `None`.
    pub fn label_if_accepted(&self, text: &str) -> Option<SentimentLabel> {
        if !self.detector.detect(text).is(&self.language) {
            return None;
        }
        let tokens = self.tokenizer.tokenize(text);
        Some(score_sentiment(&tokens, &self.lexicon, self.neutral_threshold).label)
    }
}
