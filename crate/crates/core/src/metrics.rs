//! Answer-level scoring: normalization, exact match and token F1.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean F1 and exact match, both as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScorePair {
    pub f1: f64,
    pub exact_match: f64,
}

impl ScorePair {
    pub fn f1_percent(&self) -> f64 {
        self.f1 * 100.0
    }

    pub fn em_percent(&self) -> f64 {
        self.exact_match * 100.0
    }
}

/// Renders as `F1/EM` percentages with one decimal, e.g. `53.3/37.3`.
impl fmt::Display for ScorePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}/{:.1}", self.f1_percent(), self.em_percent())
    }
}

/// Lowercases, strips ASCII punctuation, drops the articles "a", "an", "the"
/// and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn golds_or_empty(gold: &[String]) -> Vec<&str> {
    if gold.is_empty() {
        vec![""]
    } else {
        gold.iter().map(String::as_str).collect()
    }
}

/// 1.0 when the normalized prediction equals any normalized gold answer.
pub fn exact_match(pred: &str, gold: &[String]) -> f64 {
    let p = normalize(pred);
    let hit = golds_or_empty(gold).into_iter().any(|g| normalize(g) == p);
    if hit {
        1.0
    } else {
        0.0
    }
}

fn f1_single(pred: &str, gold: &str) -> f64 {
    let pred_norm = normalize(pred);
    let gold_norm = normalize(gold);
    let pred_tokens: Vec<&str> = pred_norm.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold_norm.split_whitespace().collect();
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return if pred_tokens.is_empty() && gold_tokens.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold_tokens {
        *gold_counts.entry(t).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &pred_tokens {
        if let Some(c) = gold_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Multiset token-overlap F1, maximized over the gold answers.
pub fn token_f1(pred: &str, gold: &[String]) -> f64 {
    golds_or_empty(gold)
        .into_iter()
        .map(|g| f1_single(pred, g))
        .fold(0.0, f64::max)
}

/// Unweighted mean of per-example scores over the shared ids.
///
/// Every id must appear in both maps; otherwise the mismatch is reported.
pub fn corpus_scores(
    preds: &BTreeMap<String, String>,
    golds: &BTreeMap<String, Vec<String>>,
) -> Result<ScorePair> {
    let missing: Vec<String> = golds
        .keys()
        .filter(|id| !preds.contains_key(*id))
        .cloned()
        .collect();
    let extra: Vec<String> = preds
        .keys()
        .filter(|id| !golds.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::IdMismatch { missing, extra });
    }
    if golds.is_empty() {
        return Err(Error::EmptyInput("gold answers"));
    }
    let (mut f1, mut em) = (0.0, 0.0);
    for (id, answers) in golds {
        let pred = &preds[id];
        f1 += token_f1(pred, answers);
        em += exact_match(pred, answers);
    }
    let n = golds.len() as f64;
    Ok(ScorePair {
        f1: f1 / n,
        exact_match: em / n,
    })
}

/// Reads a predictions file: a JSON object mapping id to answer string.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[derive(Deserialize)]
struct GoldLine {
    id: String,
    answers: Vec<String>,
}

/// Reads a gold file: JSONL with `{"id", "answers": [...]}` per line.
pub fn read_gold(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GoldLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(rec.id, rec.answers);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("The Cat!"), "cat");
        assert_eq!(normalize("a  b"), "b");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("Theater, an Anthem."), "theater anthem");
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match("the cat", &g(&["Cat"])), 1.0);
        assert_eq!(exact_match("cat", &g(&["dog"])), 0.0);
        assert_eq!(exact_match("b c", &g(&["a b c", "b c"])), 1.0);
    }

    #[test]
    fn f1_examples() {
        // "a" is an article: pred tokens are [b, c], so P=1, R=2/3
        assert!((token_f1("a b c", &g(&["b c d"])) - 0.8).abs() < 1e-12);
        assert_eq!(token_f1("x y z", &g(&["y z w"])), 2.0 / 3.0);
        assert_eq!(token_f1("same words", &g(&["same words"])), 1.0);
        assert_eq!(token_f1("x", &g(&["a b"])), 0.0);
    }

    #[test]
    fn f1_empty_cases() {
        assert_eq!(token_f1("", &g(&[""])), 1.0);
        assert_eq!(token_f1("the", &g(&["a"])), 1.0);
        assert_eq!(token_f1("", &g(&["cat"])), 0.0);
        assert_eq!(token_f1("cat", &g(&[""])), 0.0);
        assert_eq!(token_f1("", &[]), 1.0);
    }

    #[test]
    fn f1_counts_multiplicity() {
        // overlap is 1, not 2: gold has "dog" once
        let f = token_f1("dog dog", &g(&["dog cat"]));
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corpus_averaging() {
        let preds: BTreeMap<_, _> = [("1", "cat"), ("2", "dog")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let golds: BTreeMap<_, _> = [("1", g(&["cat"])), ("2", g(&["bird"]))]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b))
            .collect();
        let s = corpus_scores(&preds, &golds).unwrap();
        assert_eq!(s.to_string(), "50.0/50.0");
    }

    #[test]
    fn corpus_all_exact() {
        let preds: BTreeMap<_, _> = [("1".to_string(), "cat".to_string())].into();
        let golds: BTreeMap<_, _> = [("1".to_string(), g(&["The cat"]))].into();
        assert_eq!(corpus_scores(&preds, &golds).unwrap().to_string(), "100.0/100.0");
    }

    #[test]
    fn corpus_id_mismatch() {
        let preds: BTreeMap<_, _> = [("1".to_string(), "cat".to_string()), ("9".to_string(), "x".to_string())].into();
        let golds: BTreeMap<_, _> = [("1".to_string(), g(&["cat"])), ("2".to_string(), g(&["dog"]))].into();
        match corpus_scores(&preds, &golds) {
            Err(Error::IdMismatch { missing, extra }) => {
                assert_eq!(missing, vec!["2".to_string()]);
                assert_eq!(extra, vec!["9".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
