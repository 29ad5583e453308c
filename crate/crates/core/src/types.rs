//! Domain model: contexts, sentence spans, question-answer pairs and datasets.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sentence::{RuleSplitter, SentenceSplitter};

/// Domain label for contexts without one.
pub const DEFAULT_DOMAIN: &str = "default";

/// Half-open `[start, end)` range of Unicode code points inside a paragraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains_range(&self, start: usize, end: usize) -> bool {
        self.start <= start && end <= self.end
    }
}

/// A paragraph with its sentence segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    id: String,
    text: String,
    sentences: Vec<SentenceSpan>,
    domain: Option<String>,
}

impl Context {
    /// Builds a context segmented with the default rule-based splitter.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::with_splitter(id, text, &RuleSplitter::default())
    }

    pub fn with_splitter(
        id: impl Into<String>,
        text: impl Into<String>,
        splitter: &dyn SentenceSplitter,
    ) -> Self {
        let text = text.into();
        let sentences = splitter.split(&text);
        Self {
            id: id.into(),
            text,
            sentences,
            domain: None,
        }
    }

    /// Builds a context from externally supplied spans, checking the span invariants.
    pub fn from_spans(
        id: impl Into<String>,
        text: impl Into<String>,
        sentences: Vec<SentenceSpan>,
    ) -> Result<Self> {
        let text = text.into();
        let len = text.chars().count();
        let mut prev_end = 0;
        for (i, span) in sentences.iter().enumerate() {
            if span.start >= span.end || span.end > len {
                return Err(Error::validation(format!(
                    "sentence {i}: span {}..{} invalid for text of {len} chars",
                    span.start, span.end
                )));
            }
            if span.start < prev_end {
                return Err(Error::validation(format!(
                    "sentence {i}: span overlaps or precedes the previous one"
                )));
            }
            prev_end = span.end;
        }
        let ctx = Self {
            id: id.into(),
            text,
            sentences,
            domain: None,
        };
        for i in 0..ctx.sentences.len() {
            if ctx.sentence_text(i)?.trim().is_empty() {
                return Err(Error::validation(format!("sentence {i} is blank")));
            }
        }
        Ok(ctx)
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[SentenceSpan] {
        &self.sentences
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn sentence(&self, index: usize) -> Result<SentenceSpan> {
        self.sentences.get(index).copied().ok_or(Error::OutOfRange {
            index,
            len: self.sentences.len(),
        })
    }

    pub fn sentence_text(&self, index: usize) -> Result<&str> {
        let span = self.sentence(index)?;
        Ok(&self.text[self.byte_range(span.start, span.end)])
    }

    /// Converts a code-point range into a byte range of `text`.
    pub fn byte_range(&self, start: usize, end: usize) -> std::ops::Range<usize> {
        char_to_byte(&self.text, start)..char_to_byte(&self.text, end)
    }

    /// The whitespace runs around the sentences: one before the first span,
    /// one between each adjacent pair, and one after the last span.
    pub fn separators(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.sentences.len() + 1);
        let mut prev = 0;
        for span in &self.sentences {
            out.push(&self.text[self.byte_range(prev, span.start)]);
            prev = span.end;
        }
        out.push(&self.text[self.byte_range(prev, self.char_len())]);
        out
    }

    /// Code-point offsets of non-overlapping occurrences of `needle`.
    pub fn occurrences(&self, needle: &str) -> Vec<usize> {
        if needle.is_empty() {
            return Vec::new();
        }
        self.text
            .match_indices(needle)
            .map(|(byte, _)| self.text[..byte].chars().count())
            .collect()
    }

    /// Index of the occurrence of `needle` that lies inside sentence
    /// `sentence_index`, falling back to the first occurrence.
    pub fn occurrence_in_sentence(&self, needle: &str, sentence_index: Option<usize>) -> Option<usize> {
        let occurrences = self.occurrences(needle);
        if occurrences.is_empty() {
            return None;
        }
        let needle_len = needle.chars().count();
        let local = sentence_index
            .and_then(|i| self.sentences.get(i))
            .and_then(|span| {
                occurrences
                    .iter()
                    .position(|&start| span.contains_range(start, start + needle_len))
            });
        Some(local.unwrap_or(0))
    }
}

pub(crate) fn char_to_byte(text: &str, chars: usize) -> usize {
    text.char_indices()
        .nth(chars)
        .map(|(byte, _)| byte)
        .unwrap_or(text.len())
}

/// Which QAG route produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Pipeline,
    Multitask,
    End2end,
    Gold,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Pipeline => "pipeline",
            Strategy::Multitask => "multitask",
            Strategy::End2end => "end2end",
            Strategy::Gold => "gold",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipeline" => Ok(Strategy::Pipeline),
            "multitask" => Ok(Strategy::Multitask),
            "end2end" => Ok(Strategy::End2end),
            "gold" => Ok(Strategy::Gold),
            other => Err(Error::validation(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Separator character reserved by the flattened pair format.
pub const RESERVED_SEPARATOR: char = '|';

/// One question-answer pair with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct QAPair {
    question: String,
    answer: String,
    source_sentence_index: Option<usize>,
    strategy: Strategy,
    score: Option<f64>,
}

#[derive(Deserialize)]
struct RawPair {
    question: String,
    answer: String,
    #[serde(default)]
    source_sentence_index: Option<usize>,
    strategy: Strategy,
    #[serde(default)]
    score: Option<f64>,
}

impl TryFrom<RawPair> for QAPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        let mut pair = QAPair::new(raw.question, raw.answer, raw.strategy)?;
        pair.source_sentence_index = raw.source_sentence_index;
        if let Some(score) = raw.score {
            pair = pair.with_score(score);
        }
        Ok(pair)
    }
}

impl QAPair {
    pub fn new(
        question: impl Into<String>,
        answer: impl Into<String>,
        strategy: Strategy,
    ) -> Result<Self> {
        let question = question.into();
        let answer = answer.into();
        for (name, field) in [("question", &question), ("answer", &answer)] {
            if field.trim().is_empty() {
                return Err(Error::validation(format!("{name} is blank")));
            }
            if field.contains(RESERVED_SEPARATOR) {
                return Err(Error::validation(format!(
                    "{name} {field:?} contains the reserved separator '{RESERVED_SEPARATOR}'"
                )));
            }
        }
        Ok(Self {
            question,
            answer,
            source_sentence_index: None,
            strategy,
            score: None,
        })
    }

    pub fn with_source_sentence(mut self, index: usize) -> Self {
        self.source_sentence_index = Some(index);
        self
    }

    /// Attaches a sequence log-likelihood. Non-finite scores are discarded
    /// since they cannot be represented in the JSONL format.
    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score.is_finite().then_some(score);
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }

    pub fn source_sentence_index(&self) -> Option<usize> {
        self.source_sentence_index
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    fn dedupe_key(&self) -> (String, String) {
        (collapse_whitespace(&self.question), collapse_whitespace(&self.answer))
    }
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Drops repeated (question, answer) pairs, keeping the first occurrence.
/// Comparison is case-sensitive after whitespace normalization.
pub fn dedupe(pairs: Vec<QAPair>) -> Vec<QAPair> {
    let mut seen = HashSet::new();
    pairs
        .into_iter()
        .filter(|p| seen.insert(p.dedupe_key()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub context: Context,
    pub pairs: Vec<QAPair>,
}

/// Question-answer pairs grouped per context.
#[derive(Debug, Clone, PartialEq)]
pub struct QAGDataset {
    entries: Vec<DatasetEntry>,
    split: Split,
}

#[derive(Serialize, Deserialize)]
struct JsonlEntry {
    id: String,
    text: String,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    pairs: Vec<QAPair>,
}

impl QAGDataset {
    pub fn new(split: Split) -> Self {
        Self {
            entries: Vec::new(),
            split,
        }
    }

    /// Appends a context and its pairs; duplicate pairs are removed.
    pub fn push(&mut self, context: Context, pairs: Vec<QAPair>) {
        self.entries.push(DatasetEntry {
            context,
            pairs: dedupe(pairs),
        });
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<DatasetEntry> {
        self.entries
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.entries.iter().map(|e| e.pairs.len()).sum()
    }

    /// Pair counts keyed by domain (contexts without a domain count under [`DEFAULT_DOMAIN`]).
    pub fn pair_counts_by_domain(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for entry in &self.entries {
            let domain = entry.context.domain().unwrap_or(DEFAULT_DOMAIN).to_string();
            *counts.entry(domain).or_insert(0) += entry.pairs.len();
        }
        counts
    }

    /// Splits the dataset into one dataset per domain, preserving order.
    pub fn by_domain(&self) -> BTreeMap<String, QAGDataset> {
        let mut out: BTreeMap<String, QAGDataset> = BTreeMap::new();
        for entry in &self.entries {
            let domain = entry.context.domain().unwrap_or(DEFAULT_DOMAIN).to_string();
            out.entry(domain)
                .or_insert_with(|| QAGDataset::new(self.split))
                .entries
                .push(entry.clone());
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for entry in &self.entries {
            let line = JsonlEntry {
                id: entry.context.id().to_string(),
                text: entry.context.text().to_string(),
                domain: entry.context.domain().map(str::to_string),
                pairs: entry.pairs.clone(),
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Reads the JSONL format; sentence spans are recomputed with the default splitter.
    pub fn read_jsonl<R: BufRead>(reader: R, split: Split, origin: &Path) -> Result<Self> {
        let mut dataset = QAGDataset::new(split);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JsonlEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            let mut context = Context::new(entry.id, entry.text);
            if let Some(domain) = entry.domain {
                context = context.with_domain(domain);
            }
            dataset.push(context, entry.pairs);
        }
        Ok(dataset)
    }

    pub fn read_jsonl_file(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::read_jsonl(BufReader::new(file), split, path)
    }

    pub fn write_jsonl_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_jsonl(BufWriter::new(file))
    }
}

/// Reads contexts from dataset JSONL; the `pairs` field may be absent.
pub fn read_contexts(path: impl AsRef<Path>) -> Result<Vec<Context>> {
    Ok(QAGDataset::read_jsonl_file(path, Split::Test)?
        .into_entries()
        .into_iter()
        .map(|e| e.context)
        .collect())
}

/// A `(context, sentence, answer, question)` training quadruple.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupleRecord {
    pub context: Arc<Context>,
    pub sentence_index: usize,
    pub answer: String,
    pub question: String,
}

impl QuadrupleRecord {
    pub fn new(
        context: Arc<Context>,
        sentence_index: usize,
        answer: impl Into<String>,
        question: impl Into<String>,
    ) -> Result<Self> {
        let answer = answer.into();
        let question = question.into();
        context.sentence(sentence_index)?;
        if answer.trim().is_empty() || question.trim().is_empty() {
            return Err(Error::validation("quadruple answer and question must be non-blank"));
        }
        if !context.text().contains(answer.as_str()) {
            return Err(Error::validation(format!(
                "answer {answer:?} is not a substring of context {}",
                context.id()
            )));
        }
        Ok(Self {
            context,
            sentence_index,
            answer,
            question,
        })
    }
}

#[derive(Deserialize)]
struct QuadLine {
    #[serde(default)]
    id: Option<String>,
    paragraph: String,
    #[serde(default)]
    sentence_index: Option<usize>,
    #[serde(default)]
    sentence: Option<String>,
    answer: String,
    question: String,
    #[serde(default)]
    domain: Option<String>,
}

/// Reads SQuAD-style quadruples, one JSON object per line:
/// `{"id"?, "paragraph", "sentence_index" | "sentence", "answer", "question", "domain"?}`.
///
/// Records sharing a paragraph share one [`Context`]. When only the sentence
/// text is given it is located among the paragraph's segmented spans.
pub fn read_quadruples(path: impl AsRef<Path>) -> Result<Vec<QuadrupleRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut contexts: HashMap<(Option<String>, String), Arc<Context>> = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: QuadLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let next_id = contexts.len();
        let context = contexts
            .entry((rec.id.clone(), rec.paragraph.clone()))
            .or_insert_with(|| {
                let id = rec.id.clone().unwrap_or_else(|| format!("p{next_id}"));
                let mut ctx = Context::new(id, rec.paragraph.clone());
                if let Some(domain) = &rec.domain {
                    ctx = ctx.with_domain(domain.clone());
                }
                Arc::new(ctx)
            })
            .clone();
        let sentence_index = match (rec.sentence_index, rec.sentence.as_deref()) {
            (Some(idx), _) => idx,
            (None, Some(sentence)) => locate_sentence(&context, sentence)
                .ok_or_else(|| parse_err(format!("sentence {sentence:?} not found in paragraph")))?,
            (None, None) => return Err(parse_err("need sentence_index or sentence".into())),
        };
        out.push(
            QuadrupleRecord::new(context, sentence_index, rec.answer, rec.question)
                .map_err(|e| parse_err(e.to_string()))?,
        );
    }
    Ok(out)
}

fn locate_sentence(context: &Context, sentence: &str) -> Option<usize> {
    let sentence = sentence.trim();
    let start = *context.occurrences(sentence).first()?;
    context
        .sentences()
        .iter()
        .position(|span| span.start <= start && start < span.end)
}
