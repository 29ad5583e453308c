//! Backend-agnostic sequence-to-sequence generation.
//!
//! Strategy and evaluation code only sees [`Seq2SeqBackend`]. Two
//! implementations ship: a file-driven [`MockBackend`] for deterministic tests
//! and a [`PythonBackend`] bridging to pretrained encoder-decoder checkpoints.

mod mock;
mod python;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finetune::{FinetuneConfig, TrainExample, TrainingLog};

pub use mock::{FinetuneRecord, MockBackend, MockFixture};
pub use python::{PythonBackend, PythonWorker, REGISTRY_MODELS};

pub const DEFAULT_NUM_BEAMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub input_text: String,
    pub max_output_tokens: usize,
    pub num_beams: usize,
    pub num_return_sequences: usize,
}

impl GenerationRequest {
    /// Beam search with the default width and a single returned sequence.
    pub fn new(input_text: impl Into<String>, max_output_tokens: usize) -> Self {
        Self {
            input_text: input_text.into(),
            max_output_tokens,
            num_beams: DEFAULT_NUM_BEAMS,
            num_return_sequences: 1,
        }
    }

    /// Requests `n` sequences, widening the beam if needed.
    pub fn with_returns(mut self, n: usize) -> Self {
        self.num_return_sequences = n;
        self.num_beams = self.num_beams.max(n);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be at least 1".into());
        }
        if self.num_return_sequences == 0 || self.num_return_sequences > self.num_beams {
            return Err(format!(
                "num_return_sequences {} must lie in 1..={}",
                self.num_return_sequences, self.num_beams
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub log_likelihood: f64,
}

/// Outputs for one request, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub outputs: Vec<Generation>,
}

impl GenerationResult {
    pub fn best(&self) -> Option<&Generation> {
        self.outputs.first()
    }
}

/// A loaded sequence-to-sequence model.
///
/// A handle is owned by one worker at a time; callers parallelize across
/// handles, never within one.
pub trait Seq2SeqBackend: Send {
    /// Stable description used in logs and run manifests.
    fn identity(&self) -> String;

    /// One result per request, in request order.
    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>>;

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog>;

    /// Persists trained weights, if the backend has any.
    fn save(&mut self, _dir: &Path) -> Result<()> {
        Ok(())
    }
}

pub type ModelHandle = Box<dyn Seq2SeqBackend>;

impl<B: Seq2SeqBackend + ?Sized> Seq2SeqBackend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>> {
        (**self).generate(requests)
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog> {
        (**self).finetune(train, validation, cfg)
    }

    fn save(&mut self, dir: &Path) -> Result<()> {
        (**self).save(dir)
    }
}

impl<B: Seq2SeqBackend + ?Sized> Seq2SeqBackend for &mut B {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>> {
        (**self).generate(requests)
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog> {
        (**self).finetune(train, validation, cfg)
    }

    fn save(&mut self, dir: &Path) -> Result<()> {
        (**self).save(dir)
    }
}

/// Checks the shared request contract before a backend runs anything.
pub fn validate_requests(requests: &[GenerationRequest]) -> Result<()> {
    if requests.is_empty() {
        return Err(Error::EmptyInput("generation requests"));
    }
    for (index, req) in requests.iter().enumerate() {
        req.validate()
            .map_err(|message| Error::Backend { index, message })?;
    }
    Ok(())
}

/// Resolves a backend spec.
///
/// * `mock:` an empty mock whose every generation is the fallback sentinel
/// * `mock:<fixture.json>` a mock driven by a fixture file
/// * `hf:<name-or-dir>` a checkpoint loaded through the Python bridge
/// * a registry name such as `t5-small` or `facebook/bart-large`
pub fn load_backend(spec: &str) -> Result<ModelHandle> {
    if let Some(path) = spec.strip_prefix("mock:") {
        let mock = if path.trim().is_empty() {
            MockBackend::empty()
        } else {
            MockBackend::from_file(path)?
        };
        return Ok(Box::new(mock));
    }
    if let Some(name) = spec.strip_prefix("hf:") {
        return Ok(Box::new(PythonBackend::load(name)?));
    }
    if REGISTRY_MODELS.contains(&spec) {
        return Ok(Box::new(PythonBackend::load(spec)?));
    }
    Err(Error::UnknownBackend(spec.to_string()))
}

/// Wraps a backend and records every request it is sent.
pub struct Instrumented<B> {
    inner: B,
    requests: Vec<GenerationRequest>,
}

impl<B: Seq2SeqBackend> Instrumented<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            requests: Vec::new(),
        }
    }

    /// Number of generation requests served so far.
    pub fn calls(&self) -> usize {
        self.requests.len()
    }

    pub fn requests(&self) -> &[GenerationRequest] {
        &self.requests
    }

    pub fn reset(&mut self) {
        self.requests.clear();
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: Seq2SeqBackend> Seq2SeqBackend for Instrumented<B> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>> {
        self.requests.extend_from_slice(requests);
        self.inner.generate(requests)
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog> {
        self.inner.finetune(train, validation, cfg)
    }

    fn save(&mut self, dir: &Path) -> Result<()> {
        self.inner.save(dir)
    }
}
