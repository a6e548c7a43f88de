//! Valence lexicon with negator and booster sections.
//!
//! File format, one entry per line, `#` comments allowed:
//!
//! ```text
//! [valence]
//! good<TAB>0.7
//! [negators]
//! not
//! [boosters]
//! very<TAB>1.3
//! ```
//!
//! Lines before any section header are read as valence entries.

use std::collections::HashSet;
use std::sync::OnceLock;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    Line { line: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    valences: FxHashMap<String, f64>,
    negators: FxHashSet<String>,
    boosters: FxHashMap<String, f64>,
}

#[derive(Clone, Copy)]
enum Section {
    Valence,
    Negators,
    Boosters,
}

static BUNDLED: OnceLock<Lexicon> = OnceLock::new();

impl Lexicon {
    /// The English lexicon shipped with the crate.
    pub fn bundled() -> &'static Lexicon {
        BUNDLED.get_or_init(|| Lexicon::parse(include_str!("../../data/lexicon.tsv")).expect("bundled lexicon parses"))
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        let mut section = Section::Valence;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| LexiconError::Line { line: i + 1, reason: reason.to_string() };
            match line.to_ascii_lowercase().as_str() {
                "[valence]" => {
                    section = Section::Valence;
                    continue;
                }
                "[negators]" => {
                    section = Section::Negators;
                    continue;
                }
                "[boosters]" => {
                    section = Section::Boosters;
                    continue;
                }
                s if s.starts_with('[') => return Err(err("unknown section")),
                _ => {}
            }
            let mut parts = line.split('\t');
            let token = parts.next().unwrap_or_default().trim().to_lowercase();
            if token.is_empty() {
                return Err(err("empty token"));
            }
            let value = parts.next().map(|v| v.trim().parse::<f64>());
            match section {
                Section::Valence => {
                    let v = value.ok_or_else(|| err("missing valence"))?.map_err(|_| err("bad valence"))?;
                    if !v.is_finite() {
                        return Err(err("non-finite valence"));
                    }
                    lex.valences.insert(token, v.clamp(-1.0, 1.0));
                }
                Section::Negators => {
                    lex.negators.insert(token);
                }
                Section::Boosters => {
                    let m = value.ok_or_else(|| err("missing multiplier"))?.map_err(|_| err("bad multiplier"))?;
                    if !(m.is_finite() && m > 0.0) {
                        return Err(err("booster multiplier must be finite and positive"));
                    }
                    lex.boosters.insert(token, m);
                }
            }
        }
        Ok(lex)
    }

    /// Builds a lexicon from in-memory entries. Valences are clamped to [-1, 1];
    /// non-positive or non-finite booster multipliers are skipped.
    pub fn from_entries<'a>(
        valences: impl IntoIterator<Item = (&'a str, f64)>,
        negators: impl IntoIterator<Item = &'a str>,
        boosters: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Self {
        Self {
            valences: valences
                .into_iter()
                .filter(|(_, v)| v.is_finite())
                .map(|(k, v)| (k.to_lowercase(), v.clamp(-1.0, 1.0)))
                .collect(),
            negators: negators.into_iter().map(str::to_lowercase).collect(),
            boosters: boosters
                .into_iter()
                .filter(|(_, m)| m.is_finite() && *m > 0.0)
                .map(|(k, m)| (k.to_lowercase(), m))
                .collect(),
        }
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn booster(&self, token: &str) -> Option<f64> {
        self.boosters.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// One-character tokens the tokenizer must keep.
    pub fn single_char_tokens(&self) -> HashSet<String> {
        self.valences
            .keys()
            .chain(self.negators.iter())
            .chain(self.boosters.keys())
            .filter(|k| k.chars().count() == 1)
            .cloned()
            .collect()
    }

    /// Same lexicon with every valence multiplied by `factor` (then clamped).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.valences.values_mut() {
            *v = (*v * factor).clamp(-1.0, 1.0);
        }
        out
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, f64)> {
        self.valences.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
