//! Extractive QA readers trained on (pseudo) QA pairs, and their grid search.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::{Arc, Mutex};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backend::PythonWorker;
use crate::error::{Error, Result};
use crate::finetune::FinetuneConfig;
use crate::metrics::{corpus_scores, ScorePair};
use crate::types::QAGDataset;

/// One span-aligned training example. `answer_start` is a code-point offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderExample {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer: String,
    pub answer_start: usize,
}

/// A held-out question with its accepted answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestExample {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub domain: Option<String>,
}

/// Reads test JSONL: `{"id", "context", "question", "answers": [...], "domain"?}`.
pub fn read_test_set(path: impl AsRef<Path>) -> Result<Vec<TestExample>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Converts a QAG dataset into reader examples, aligning each answer to its
/// first occurrence in the context. Pairs whose answer is not a substring of
/// the context are dropped and counted.
pub fn to_reader_examples(dataset: &QAGDataset) -> (Vec<ReaderExample>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    for entry in dataset.entries() {
        for (j, pair) in entry.pairs.iter().enumerate() {
            match entry.context.occurrences(pair.answer()).first() {
                Some(&start) => out.push(ReaderExample {
                    id: format!("{}-{j}", entry.context.id()),
                    context: entry.context.text().to_string(),
                    question: pair.question().to_string(),
                    answer: pair.answer().to_string(),
                    answer_start: start,
                }),
                None => dropped += 1,
            }
        }
    }
    (out, dropped)
}

pub trait Reader: Send {
    /// Answers each `(context, question)`, in order.
    fn predict(&mut self, inputs: &[(&str, &str)]) -> Result<Vec<String>>;
}

pub trait ReaderTrainer: Send {
    fn identity(&self) -> String;

    fn train(
        &mut self,
        train: &[ReaderExample],
        validation: &[ReaderExample],
        cfg: &FinetuneConfig,
    ) -> Result<Box<dyn Reader>>;
}

/// Memorizing reader: returns the training answer for questions it has
/// seen (keyed by context and question), the empty string otherwise.
#[derive(Debug, Default, Clone)]
pub struct MockReaderTrainer {
    trainings: usize,
}

impl MockReaderTrainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trainings(&self) -> usize {
        self.trainings
    }
}

struct MemorizingReader {
    answers: HashMap<(String, String), String>,
}

impl Reader for MemorizingReader {
    fn predict(&mut self, inputs: &[(&str, &str)]) -> Result<Vec<String>> {
        Ok(inputs
            .iter()
            .map(|(c, q)| {
                self.answers
                    .get(&(c.to_string(), q.to_string()))
                    .cloned()
                    .unwrap_or_default()
            })
            .collect())
    }
}

impl ReaderTrainer for MockReaderTrainer {
    fn identity(&self) -> String {
        "mock".into()
    }

    fn train(
        &mut self,
        train: &[ReaderExample],
        _validation: &[ReaderExample],
        _cfg: &FinetuneConfig,
    ) -> Result<Box<dyn Reader>> {
        self.trainings += 1;
        let mut answers = HashMap::new();
        for ex in train {
            answers
                .entry((ex.context.clone(), ex.question.clone()))
                .or_insert_with(|| ex.answer.clone());
        }
        Ok(Box::new(MemorizingReader { answers }))
    }
}

/// Extractive reader fine-tuned through the Python worker
/// (e.g. `distilbert-base-uncased`).
pub struct HfReaderTrainer {
    model: String,
    worker: Arc<Mutex<PythonWorker>>,
    next_id: usize,
}

impl HfReaderTrainer {
    pub fn new(model: &str) -> Result<Self> {
        Ok(Self {
            model: model.to_string(),
            worker: Arc::new(Mutex::new(PythonWorker::spawn()?)),
            next_id: 0,
        })
    }
}

struct HfReader {
    id: usize,
    worker: Arc<Mutex<PythonWorker>>,
}

#[derive(Deserialize)]
struct PredictResponse {
    answers: Vec<String>,
}

impl Reader for HfReader {
    fn predict(&mut self, inputs: &[(&str, &str)]) -> Result<Vec<String>> {
        let examples: Vec<_> = inputs
            .iter()
            .map(|(c, q)| json!({"context": c, "question": q}))
            .collect();
        let mut worker = self.worker.lock().expect("worker lock poisoned");
        let resp = worker.call_ok(&json!({"op": "predict", "reader_id": self.id, "examples": examples}))?;
        let parsed: PredictResponse = serde_json::from_value(resp)?;
        Ok(parsed.answers)
    }
}

impl ReaderTrainer for HfReaderTrainer {
    fn identity(&self) -> String {
        format!("hf:{}", self.model)
    }

    fn train(
        &mut self,
        train: &[ReaderExample],
        validation: &[ReaderExample],
        cfg: &FinetuneConfig,
    ) -> Result<Box<dyn Reader>> {
        let id = self.next_id;
        self.next_id += 1;
        self.worker
            .lock()
            .expect("worker lock poisoned")
            .call_ok(&json!({
                "op": "train_reader",
                "reader_id": id,
                "model": self.model,
                "train": train,
                "validation": validation,
                "config": cfg,
            }))?;
        Ok(Box::new(HfReader {
            id,
            worker: Arc::clone(&self.worker),
        }))
    }
}

/// `mock`, `hf:<name>` or a bare hub name such as `distilbert-base-uncased`.
pub fn load_reader_trainer(spec: &str) -> Result<Box<dyn ReaderTrainer>> {
    match spec {
        "mock" | "mock:" => Ok(Box::new(MockReaderTrainer::new())),
        s if s.starts_with("hf:") => Ok(Box::new(HfReaderTrainer::new(&s[3..])?)),
        "distilbert-base-uncased" | "distilbert-base-cased" => Ok(Box::new(HfReaderTrainer::new(spec)?)),
        other => Err(Error::UnknownBackend(other.to_string())),
    }
}

/// Scores a reader on held-out questions.
pub fn evaluate(reader: &mut dyn Reader, test: &[TestExample]) -> Result<ScorePair> {
    let inputs: Vec<(&str, &str)> = test
        .iter()
        .map(|t| (t.context.as_str(), t.question.as_str()))
        .collect();
    let answers = reader.predict(&inputs)?;
    if answers.len() != test.len() {
        return Err(Error::BackendUnavailable(format!(
            "reader returned {} answers for {} questions",
            answers.len(),
            test.len()
        )));
    }
    let preds: BTreeMap<String, String> = test
        .iter()
        .zip(answers)
        .map(|(t, a)| (t.id.clone(), a))
        .collect();
    let golds: BTreeMap<String, Vec<String>> = test
        .iter()
        .map(|t| (t.id.clone(), t.answers.clone()))
        .collect();
    if preds.len() != test.len() {
        return Err(Error::validation("test set ids are not unique"));
    }
    corpus_scores(&preds, &golds)
}

fn as_test(examples: &[ReaderExample]) -> Vec<TestExample> {
    examples
        .iter()
        .map(|e| TestExample {
            id: e.id.clone(),
            context: e.context.clone(),
            question: e.question.clone(),
            answers: vec![e.answer.clone()],
            domain: None,
        })
        .collect()
}

/// Reader hyperparameter grid, searched exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderGrid {
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ReaderGrid {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-5, 5e-5, 1e-4],
            epochs: vec![2, 3, 4],
            batch_size: 32,
            seed: 42,
        }
    }
}

impl ReaderGrid {
    /// A one-point grid.
    pub fn fixed(cfg: &FinetuneConfig) -> Self {
        Self {
            learning_rates: vec![cfg.learning_rate],
            epochs: vec![cfg.epochs],
            batch_size: cfg.batch_size,
            seed: cfg.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn configs(&self) -> Vec<FinetuneConfig> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &epochs in &self.epochs {
                out.push(FinetuneConfig {
                    epochs,
                    learning_rate,
                    label_smoothing: 0.0,
                    batch_size: self.batch_size,
                    seed: self.seed,
                });
            }
        }
        out
    }
}

/// The selected reader and how the grid scored on validation.
pub struct TrainedReader {
    pub reader: Box<dyn Reader>,
    pub config: FinetuneConfig,
    pub validation: Option<ScorePair>,
    pub grid_scores: Vec<(FinetuneConfig, ScorePair)>,
    /// Pairs dropped because their answer was not in the context.
    pub dropped: usize,
}

/// Trains one reader per grid point and keeps the best by validation F1
/// (the first wins ties). Without validation data the first grid point is used.
pub fn train_reader(
    train: &QAGDataset,
    validation: &QAGDataset,
    trainer: &mut dyn ReaderTrainer,
    grid: &ReaderGrid,
) -> Result<TrainedReader> {
    let (train_ex, dropped_train) = to_reader_examples(train);
    let (val_ex, dropped_val) = to_reader_examples(validation);
    let dropped = dropped_train + dropped_val;
    if dropped > 0 {
        warn!("{dropped} pairs dropped: answer not found in context");
    }
    if train_ex.is_empty() {
        return Err(Error::EmptyDataset { dropped });
    }
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(Error::validation("reader grid is empty"));
    }
    for cfg in &configs {
        cfg.validate()?;
    }
    if val_ex.is_empty() {
        let config = configs[0].clone();
        let reader = trainer.train(&train_ex, &val_ex, &config)?;
        return Ok(TrainedReader {
            reader,
            config,
            validation: None,
            grid_scores: Vec::new(),
            dropped,
        });
    }
    let val_test = as_test(&val_ex);
    let mut best: Option<(Box<dyn Reader>, FinetuneConfig, ScorePair)> = None;
    let mut grid_scores = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut reader = trainer.train(&train_ex, &val_ex, &cfg)?;
        let score = evaluate(reader.as_mut(), &val_test)?;
        info!(
            "reader lr={} epochs={}: validation {score}",
            cfg.learning_rate, cfg.epochs
        );
        grid_scores.push((cfg.clone(), score));
        if best.as_ref().is_none_or(|(_, _, b)| score.f1 > b.f1) {
            best = Some((reader, cfg, score));
        }
    }
    let (reader, config, score) = best.expect("grid has at least one point");
    Ok(TrainedReader {
        reader,
        config,
        validation: Some(score),
        grid_scores,
        dropped,
    })
}
