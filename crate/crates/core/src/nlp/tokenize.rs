//! Tweet cleaning and tokenization.

use std::collections::HashSet;

use rustc_hash::FxHashSet;

fn is_emoticon(chunk: &str) -> bool {
    matches!(
        chunk,
        ":)" | ":-)" | ":(" | ":-(" | ":D" | ":-D" | ";)" | ";-)" | ":P" | ":-P" | ":p" | ":-p" | ":'(" | ":/" | ":-/"
            | ":|" | ":-|" | ":o" | ":O" | ":-o" | ":-O" | "<3" | "</3" | "XD" | "xD" | ":*" | ":-*" | "=)" | "=("
            | "=D" | "^^" | "^_^" | "-_-" | "o_O" | "O_o" | ":]" | ":[" | "8)" | "8-)" | "B)" | ":3" | ";D" | ":S"
            | ":$" | ":@" | ">:(" | "D:"
    )
}

/// Emoji and pictographic codepoints, including joiners and variation selectors.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0x2190..=0x21FF
        | 0xFE00..=0xFE0F
        | 0x200D
        | 0x20E3
        | 0xE0020..=0xE007F
        | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

fn is_url(chunk: &str) -> bool {
    let c = chunk.trim_start_matches(|ch: char| matches!(ch, '(' | '[' | '<' | '"' | '\'' | '{'));
    let starts = |p: &str| c.get(..p.len()).is_some_and(|h| h.eq_ignore_ascii_case(p));
    starts("http://") || starts("https://") || starts("www.")
}

/// Whitespace-delimited chunks dropped wholesale before tokenizing: URLs,
/// @mentions, the retweet marker and ASCII emoticons.
pub fn is_noise_chunk(chunk: &str) -> bool {
    let Some(&first) = chunk.as_bytes().first() else {
        return false;
    };
    if first.is_ascii_lowercase() && first != b'h' && first != b'w' && first != b'o' && first != b'x' {
        return false;
    }
    first == b'@' || chunk == "RT" || chunk == "RT:" || is_url(chunk) || (chunk.len() <= 3 && is_emoticon(chunk))
}

/// Splits cleaned text into lowercase alphanumeric tokens.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    keep_single: FxHashSet<String>,
}

impl Tokenizer {
    /// `keep_single` lists one-character tokens that survive the length filter
    /// (normally the single-character lexicon entries).
    pub fn new(keep_single: HashSet<String>) -> Self {
        Self { keep_single: keep_single.into_iter().collect() }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.for_each_token(text, |t| out.push(t.to_string()));
        out
    }

    /// Calls `f` with each token of `text`, in order.
    pub fn for_each_token(&self, text: &str, mut f: impl FnMut(&str)) {
        let mut cur = String::with_capacity(32);
        for chunk in text.split_whitespace() {
            if is_noise_chunk(chunk) {
                continue;
            }
            for c in chunk.chars() {
                if c.is_ascii() {
                    if c.is_ascii_alphanumeric() {
                        cur.push(c.to_ascii_lowercase());
                    } else {
                        self.flush(&mut cur, &mut f);
                    }
                    continue;
                }
                if is_emoji(c) {
                    self.flush(&mut cur, &mut f);
                    continue;
                }
                for lc in c.to_lowercase() {
                    if lc.is_alphanumeric() {
                        cur.push(lc);
                    } else {
                        self.flush(&mut cur, &mut f);
                    }
                }
            }
            self.flush(&mut cur, &mut f);
        }
    }

    fn flush(&self, cur: &mut String, f: &mut impl FnMut(&str)) {
        if cur.is_empty() {
            return;
        }
        let mut chars = cur.chars();
        let single = chars.next().is_some() && chars.next().is_none();
        if !single || self.keep_single.contains(cur.as_str()) {
            f(cur);
        }
        cur.clear();
    }
}

/// Tokenizes with no single-character exceptions.
pub fn clean_and_tokenize(text: &str) -> Vec<String> {
    Tokenizer::default().tokenize(text)
}
