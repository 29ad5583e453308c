//! Rule-based sentence segmentation.
//!
//! Offsets are Unicode code points into the paragraph. A boundary is placed
//! after terminal punctuation (`.`, `!`, `?`, plus any closing quotes or
//! brackets) when it is followed by whitespace and then an uppercase letter or
//! a digit, unless the word ending at the period is a known abbreviation or a
//! single-letter initial.

use crate::types::SentenceSpan;

/// Anything that can segment a paragraph into sentence spans.
///
/// Implementations must be deterministic and return spans that are
/// non-overlapping, ascending, non-empty after trimming, and that carry no
/// leading or trailing whitespace.
pub trait SentenceSplitter: Send + Sync {
    fn split(&self, text: &str) -> Vec<SentenceSpan>;
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "gen", "col", "lt", "sgt", "capt",
    "gov", "sen", "rep", "rev", "hon", "pres", "vs", "etc", "inc", "ltd", "co", "corp", "no",
    "vol", "fig", "approx", "dept", "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec", "ave", "blvd", "rd",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{bb}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}', '\u{ab}'];

#[derive(Debug, Clone)]
pub struct RuleSplitter {
    abbreviations: Vec<String>,
}

impl Default for RuleSplitter {
    fn default() -> Self {
        Self {
            abbreviations: ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RuleSplitter {
    /// Adds extra abbreviations (case-insensitive, without the trailing period).
    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.abbreviations
            .extend(extra.into_iter().map(|s| s.into().to_lowercase()));
        self
    }

    fn is_abbreviation(&self, chars: &[char], period: usize) -> bool {
        let mut start = period;
        while start > 0 && !chars[start - 1].is_whitespace() {
            start -= 1;
        }
        let word: String = chars[start..period]
            .iter()
            .skip_while(|c| OPENERS.contains(c))
            .collect();
        if word.is_empty() {
            return false;
        }
        let mut letters = word.chars();
        if let (Some(c), None) = (letters.next(), letters.next()) {
            if c.is_uppercase() {
                return true;
            }
        }
        let lower = word.to_lowercase();
        if self.abbreviations.contains(&lower) {
            return true;
        }
        // dotted forms such as "U.S" or "e.g"
        lower.contains('.')
            && lower
                .split('.')
                .all(|part| !part.is_empty() && part.chars().all(char::is_alphabetic))
    }
}

impl SentenceSplitter for RuleSplitter {
    fn split(&self, text: &str) -> Vec<SentenceSpan> {
        let chars: Vec<char> = text.chars().collect();
        let mut cuts = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            while end < chars.len() && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].is_whitespace() {
                next += 1;
            }
            if next == end || next == chars.len() {
                i = end;
                continue;
            }
            let mut head = next;
            while head < chars.len() && OPENERS.contains(&chars[head]) {
                head += 1;
            }
            let starts_sentence = head < chars.len()
                && (chars[head].is_uppercase() || chars[head].is_ascii_digit());
            let abbreviated = c == '.' && end == i + 1 && self.is_abbreviation(&chars, i);
            if starts_sentence && !abbreviated {
                cuts.push(end);
            }
            i = end;
        }
        cuts.push(chars.len());

        let mut spans = Vec::with_capacity(cuts.len());
        let mut from = 0;
        for cut in cuts {
            let mut start = from;
            while start < cut && chars[start].is_whitespace() {
                start += 1;
            }
            let mut end = cut;
            while end > start && chars[end - 1].is_whitespace() {
                end -= 1;
            }
            if start < end {
                spans.push(SentenceSpan { start, end });
            }
            from = cut;
        }
        spans
    }
}

/// Segments `text` with the default [`RuleSplitter`].
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    RuleSplitter::default().split(text)
}
