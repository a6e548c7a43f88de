//! Term counts per sentiment class (word-cloud input).

use std::collections::{HashMap, HashSet};

use super::sentiment::SentimentLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFilter {
    All,
    Only(SentimentLabel),
}

impl LabelFilter {
    fn accepts(self, label: SentimentLabel) -> bool {
        match self {
            LabelFilter::All => true,
            LabelFilter::Only(l) => l == label,
        }
    }
}

/// Top-`n` tokens by count over documents whose label passes `filter`.
/// Stopwords are skipped; equal counts are ordered lexicographically.
pub fn term_frequencies<'a, S, I>(docs: I, filter: LabelFilter, n: usize, stopwords: &HashSet<String>) -> Vec<(String, usize)>
where
    S: AsRef<str> + 'a,
    I: IntoIterator<Item = (&'a [S], SentimentLabel)>,
{
    assert!(n >= 1, "n must be at least 1");
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (tokens, label) in docs {
        if !filter.accepts(label) {
            continue;
        }
        for t in tokens {
            let t = t.as_ref();
            if !stopwords.contains(t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut v: Vec<(String, usize)> = counts.into_iter().map(|(k, c)| (k.to_string(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(n);
    v
}
