//! Model input and output strings: highlighted contexts, task prefixes, and
//! the flattened `question: q, answer: a | ...` serialization with its parser.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{char_to_byte, dedupe, Context, QAPair, Strategy};

/// Character budget per token used to pre-truncate inputs before they reach a tokenizer.
pub const CHARS_PER_TOKEN_GUARD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub highlight_token: String,
    pub pair_separator: String,
    pub question_marker: String,
    pub answer_marker: String,
    pub ae_prefix: String,
    pub qg_prefix: String,
    pub max_input_tokens: usize,
    pub max_output_tokens_e2e: usize,
    pub max_output_tokens_short: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            highlight_token: "<hl>".into(),
            pair_separator: " | ".into(),
            question_marker: "question: ".into(),
            answer_marker: ", answer: ".into(),
            ae_prefix: "extract answer: ".into(),
            qg_prefix: "generate question: ".into(),
            max_input_tokens: 512,
            max_output_tokens_e2e: 256,
            max_output_tokens_short: 32,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        let markers = [
            ("highlight_token", &self.highlight_token),
            ("pair_separator", &self.pair_separator),
            ("question_marker", &self.question_marker),
            ("answer_marker", &self.answer_marker),
        ];
        for (i, (name, value)) in markers.iter().enumerate() {
            if value.trim().is_empty() {
                return Err(Error::validation(format!("{name} must be non-blank")));
            }
            for (other, other_value) in &markers[i + 1..] {
                if value == other_value {
                    return Err(Error::validation(format!("{name} and {other} must differ")));
                }
            }
        }
        if self.max_input_tokens == 0
            || self.max_output_tokens_e2e == 0
            || self.max_output_tokens_short == 0
        {
            return Err(Error::validation("length limits must be positive"));
        }
        Ok(())
    }

    /// Parses a flat TOML key-value file; missing keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Maximum number of characters an input may have before tokenization.
    pub fn max_input_chars(&self) -> usize {
        self.max_input_tokens * CHARS_PER_TOKEN_GUARD
    }

    pub fn max_output_chars(&self, end2end: bool) -> usize {
        let tokens = if end2end {
            self.max_output_tokens_e2e
        } else {
            self.max_output_tokens_short
        };
        tokens * CHARS_PER_TOKEN_GUARD
    }
}

/// Truncates `text` to at most `max_chars` code points. Returns whether it was cut.
pub fn truncate_chars(text: &mut String, max_chars: usize) -> bool {
    let byte = char_to_byte(text, max_chars);
    if byte < text.len() {
        text.truncate(byte);
        true
    } else {
        false
    }
}

/// Inserts the highlight token around the code-point range `[start, end)`,
/// each token padded with single spaces.
fn highlight_range(text: &str, start: usize, end: usize, token: &str) -> String {
    let start_b = char_to_byte(text, start);
    let end_b = char_to_byte(text, end);
    let (before, rest) = text.split_at(start_b);
    let (inner, after) = rest.split_at(end_b - start_b);
    let mut out = String::with_capacity(text.len() + 2 * token.len() + 4);
    out.push_str(before);
    if !before.is_empty() && !before.ends_with(char::is_whitespace) {
        out.push(' ');
    }
    out.push_str(token);
    out.push(' ');
    out.push_str(inner);
    out.push(' ');
    out.push_str(token);
    if !after.is_empty() && !after.starts_with(char::is_whitespace) {
        out.push(' ');
    }
    out.push_str(after);
    out
}

fn check_no_highlight(context: &Context, cfg: &EncodingConfig) -> Result<()> {
    if context.text().contains(cfg.highlight_token.as_str()) {
        return Err(Error::validation(format!(
            "context {} already contains the highlight token {:?}",
            context.id(),
            cfg.highlight_token
        )));
    }
    Ok(())
}

/// Answer-extraction input: the context with one sentence highlighted.
pub fn encode_ae_input(
    context: &Context,
    sentence_index: usize,
    cfg: &EncodingConfig,
    with_prefix: bool,
) -> Result<String> {
    let span = context.sentence(sentence_index)?;
    check_no_highlight(context, cfg)?;
    let body = highlight_range(context.text(), span.start, span.end, &cfg.highlight_token);
    Ok(if with_prefix {
        format!("{}{}", cfg.ae_prefix, body)
    } else {
        body
    })
}

/// Question-generation input: the context with the `occurrence`-th
/// appearance of `answer` highlighted.
pub fn encode_qg_input(
    context: &Context,
    answer: &str,
    occurrence: usize,
    cfg: &EncodingConfig,
    with_prefix: bool,
) -> Result<String> {
    if answer.is_empty() {
        return Err(Error::validation("answer is empty"));
    }
    check_no_highlight(context, cfg)?;
    let start = *context
        .occurrences(answer)
        .get(occurrence)
        .ok_or_else(|| Error::AnswerNotFound {
            answer: answer.to_string(),
            occurrence,
        })?;
    let end = start + answer.chars().count();
    let body = highlight_range(context.text(), start, end, &cfg.highlight_token);
    Ok(if with_prefix {
        format!("{}{}", cfg.qg_prefix, body)
    } else {
        body
    })
}

/// Removes highlight tokens together with their inner padding spaces.
///
/// This inverts [`encode_ae_input`] and [`encode_qg_input`] (without prefix)
/// whenever the highlighted span is bounded by whitespace or the text edges,
/// which every sentence span is.
pub fn remove_highlights(encoded: &str, cfg: &EncodingConfig) -> String {
    let token = cfg.highlight_token.as_str();
    let mut out = String::with_capacity(encoded.len());
    let mut rest = encoded;
    let mut opening = true;
    while let Some(pos) = rest.find(token) {
        let (head, tail) = rest.split_at(pos);
        let tail = &tail[token.len()..];
        if opening {
            out.push_str(head);
            rest = tail.strip_prefix(' ').unwrap_or(tail);
        } else {
            out.push_str(head.strip_suffix(' ').unwrap_or(head));
            rest = tail;
        }
        opening = !opening;
    }
    out.push_str(rest);
    out
}

/// Checks that a pair can be flattened without corrupting the format.
pub fn check_flattenable(pair: &QAPair, cfg: &EncodingConfig) -> Result<()> {
    let sep = cfg.pair_separator.trim();
    for (name, field) in [("question", pair.question()), ("answer", pair.answer())] {
        if field.contains(cfg.pair_separator.as_str()) || field.contains(sep) {
            return Err(Error::validation(format!(
                "{name} {field:?} contains the pair separator"
            )));
        }
    }
    if pair.question().contains(cfg.answer_marker.trim_end()) {
        return Err(Error::validation(format!(
            "question {:?} contains the answer marker",
            pair.question()
        )));
    }
    Ok(())
}

/// Serializes pairs as `question: q1, answer: a1 | question: q2, answer: a2`.
pub fn flatten_pairs(pairs: &[QAPair], cfg: &EncodingConfig) -> Result<String> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair list"));
    }
    let mut parts = Vec::with_capacity(pairs.len());
    for pair in pairs {
        check_flattenable(pair, cfg)?;
        parts.push(format!(
            "{}{}{}{}",
            cfg.question_marker,
            pair.question(),
            cfg.answer_marker,
            pair.answer()
        ));
    }
    Ok(parts.join(&cfg.pair_separator))
}

/// Result of parsing free-form model output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedPairs {
    pub pairs: Vec<QAPair>,
    /// Non-blank segments that did not match the template.
    pub dropped: usize,
}

/// Byte range of the first match of `marker` in `hay`, where any whitespace
/// inside the marker matches zero or more whitespace characters.
fn find_relaxed(hay: &str, marker: &str) -> Option<(usize, usize)> {
    let pieces: Vec<&str> = marker.split_whitespace().collect();
    let (first, rest) = pieces.split_first()?;
    'candidates: for (start, _) in hay.match_indices(first) {
        let mut end = start + first.len();
        for piece in rest {
            let tail = &hay[end..];
            let skipped = tail.len() - tail.trim_start().len();
            if !tail[skipped..].starts_with(piece) {
                continue 'candidates;
            }
            end += skipped + piece.len();
        }
        return Some((start, end));
    }
    None
}

/// Best-effort inverse of [`flatten_pairs`]. Never fails.
///
/// Segments are split on the separator (with or without surrounding spaces).
/// A segment must start with the question marker and contain the answer
/// marker; the first answer marker wins. Markers are matched with their
/// surrounding whitespace relaxed. Pairs are tagged [`Strategy::End2end`].
pub fn parse_flat(output: &str, cfg: &EncodingConfig) -> ParsedPairs {
    let sep = cfg.pair_separator.trim();
    let q_marker = cfg.question_marker.trim();
    let a_marker = cfg.answer_marker.trim();
    let mut parsed = ParsedPairs::default();
    let mut pairs = Vec::new();
    for segment in output.split(sep) {
        let segment = segment.trim();
        if segment.is_empty() {
            continue;
        }
        let pair = find_relaxed(segment, q_marker)
            .filter(|(start, _)| *start == 0)
            .and_then(|(_, end)| {
                let rest = &segment[end..];
                find_relaxed(rest, a_marker).map(|(s, e)| (&rest[..s], &rest[e..]))
            })
            .and_then(|(q, a)| QAPair::new(q.trim(), a.trim(), Strategy::End2end).ok());
        match pair {
            Some(p) => pairs.push(p),
            None => parsed.dropped += 1,
        }
    }
    parsed.pairs = dedupe(pairs);
    parsed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EncodingConfig {
        EncodingConfig::default()
    }

    fn pair(q: &str, a: &str) -> QAPair {
        QAPair::new(q, a, Strategy::End2end).unwrap()
    }

    #[test]
    fn ae_highlights_second_sentence() {
        let ctx = Context::new("c", "A b. C d.");
        assert_eq!(encode_ae_input(&ctx, 1, &cfg(), false).unwrap(), "A b. <hl> C d. <hl>");
    }

    #[test]
    fn ae_with_prefix() {
        let ctx = Context::new("c", "A b. C d.");
        assert_eq!(
            encode_ae_input(&ctx, 0, &cfg(), true).unwrap(),
            "extract answer: <hl> A b. <hl> C d."
        );
    }

    #[test]
    fn ae_single_sentence() {
        let ctx = Context::new("c", "Only one.");
        assert_eq!(encode_ae_input(&ctx, 0, &cfg(), false).unwrap(), "<hl> Only one. <hl>");
    }

    #[test]
    fn ae_bad_index() {
        let ctx = Context::new("c", "Only one.");
        assert!(matches!(
            encode_ae_input(&ctx, 1, &cfg(), false),
            Err(Error::OutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn qg_highlights_answer() {
        let ctx = Context::new("c", "Paris is big.");
        assert_eq!(
            encode_qg_input(&ctx, "Paris", 0, &cfg(), false).unwrap(),
            "<hl> Paris <hl> is big."
        );
    }

    #[test]
    fn qg_occurrence_disambiguation() {
        let ctx = Context::new("c", "a b a");
        assert_eq!(encode_qg_input(&ctx, "a", 1, &cfg(), false).unwrap(), "a b <hl> a <hl>");
    }

    #[test]
    fn qg_not_found() {
        let ctx = Context::new("c", "a b");
        assert!(matches!(
            encode_qg_input(&ctx, "z", 0, &cfg(), false),
            Err(Error::AnswerNotFound { .. })
        ));
        assert!(encode_qg_input(&ctx, "a", 1, &cfg(), false).is_err());
    }

    #[test]
    fn qg_prefix_and_inner_word() {
        let ctx = Context::new("c", "Population 12000 people.");
        assert_eq!(
            encode_qg_input(&ctx, "12000", 0, &cfg(), true).unwrap(),
            "generate question: Population <hl> 12000 <hl> people."
        );
        // answers inside a word get padded on both sides
        let ctx = Context::new("c", "unbelievable");
        assert_eq!(encode_qg_input(&ctx, "believ", 0, &cfg(), false).unwrap(), "un <hl> believ <hl> able");
    }

    #[test]
    fn context_containing_highlight_rejected() {
        let ctx = Context::new("c", "A <hl> b.");
        assert!(encode_ae_input(&ctx, 0, &cfg(), false).is_err());
    }

    #[test]
    fn flatten_single() {
        assert_eq!(
            flatten_pairs(&[pair("Who?", "Bob")], &cfg()).unwrap(),
            "question: Who?, answer: Bob"
        );
    }

    #[test]
    fn flatten_two() {
        assert_eq!(
            flatten_pairs(&[pair("Who?", "Bob"), pair("When?", "Now")], &cfg()).unwrap(),
            "question: Who?, answer: Bob | question: When?, answer: Now"
        );
    }

    #[test]
    fn flatten_empty_is_error() {
        assert!(matches!(flatten_pairs(&[], &cfg()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn flatten_rejects_answer_marker_in_question() {
        let p = pair("Is it, answer: yes?", "yes");
        assert!(matches!(flatten_pairs(&[p], &cfg()), Err(Error::Validation(_))));
    }

    #[test]
    fn flatten_rejects_custom_separator_in_field() {
        let cfg = EncodingConfig {
            pair_separator: " ## ".into(),
            ..cfg()
        };
        let p = pair("a ## b", "c");
        assert!(flatten_pairs(&[p], &cfg).is_err());
    }

    #[test]
    fn parse_two() {
        let out = parse_flat("question: Who?, answer: Bob | question: When?, answer: Now", &cfg());
        assert_eq!(out.pairs, vec![pair("Who?", "Bob"), pair("When?", "Now")]);
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn parse_drops_garbage() {
        let out = parse_flat("garbage | question: Who?, answer: Bob", &cfg());
        assert_eq!(out.pairs, vec![pair("Who?", "Bob")]);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn parse_bare_pipe_and_tight_markers() {
        let out = parse_flat("question:Who?, answer:Bob|question: When?,answer: Now", &cfg());
        assert_eq!(out.pairs, vec![pair("Who?", "Bob"), pair("When?", "Now")]);
    }

    #[test]
    fn parse_first_answer_marker_wins() {
        let out = parse_flat("question: Q, answer: A, answer: B", &cfg());
        assert_eq!(out.pairs, vec![pair("Q", "A, answer: B")]);
    }

    #[test]
    fn parse_drops_blank_fields_and_dedupes() {
        let out = parse_flat(
            "question: , answer: x | question: Q, answer: A | question: Q, answer:  A",
            &cfg(),
        );
        assert_eq!(out.pairs, vec![pair("Q", "A")]);
        assert_eq!(out.dropped, 1);
        assert_eq!(parse_flat("", &cfg()), ParsedPairs::default());
        assert_eq!(parse_flat("gibberish", &cfg()).dropped, 1);
    }

    #[test]
    fn config_toml_round_trip_and_defaults() {
        let cfg = cfg();
        assert_eq!(EncodingConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        let partial = EncodingConfig::from_toml_str("max_input_tokens = 128\n").unwrap();
        assert_eq!(partial.max_input_tokens, 128);
        assert_eq!(partial.pair_separator, " | ");
        assert!(EncodingConfig::from_toml_str("highlight_token = \" | \"").is_err());
        assert!(EncodingConfig::from_toml_str("max_input_tokens = 0").is_err());
        assert!(EncodingConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn truncation_guard() {
        let cfg = cfg();
        assert_eq!(cfg.max_input_chars(), 2048);
        assert_eq!(cfg.max_output_chars(true), 1024);
        assert_eq!(cfg.max_output_chars(false), 128);
        let mut s = "é".repeat(10);
        assert!(truncate_chars(&mut s, 4));
        assert_eq!(s.chars().count(), 4);
        assert!(!truncate_chars(&mut s, 4));
    }
}
