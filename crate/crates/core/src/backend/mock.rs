//! Deterministic lookup-table backend.
//!
//! Fixture format: `{"map": {input: output | [output, ...]}, "fallback": string}`.
//! The i-th listed output for an input gets log-likelihood `-i`; inputs that
//! are not in the table (and padding when fewer outputs than requested exist)
//! yield the fallback text with log-likelihood `-inf`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_requests, Generation, GenerationRequest, GenerationResult, Seq2SeqBackend};
use crate::error::Result;
use crate::finetune::{FinetuneConfig, Task, TrainExample, TrainingLog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockOutputs {
    One(String),
    Many(Vec<String>),
}

impl MockOutputs {
    pub fn as_slice(&self) -> &[String] {
        match self {
            MockOutputs::One(s) => std::slice::from_ref(s),
            MockOutputs::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MockFixture {
    #[serde(default)]
    pub map: BTreeMap<String, MockOutputs>,
    #[serde(default)]
    pub fallback: String,
}

impl MockFixture {
    pub fn insert(&mut self, input: impl Into<String>, output: impl Into<String>) -> &mut Self {
        self.map.insert(input.into(), MockOutputs::One(output.into()));
        self
    }

    pub fn insert_many<I, S>(&mut self, input: impl Into<String>, outputs: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.map.insert(
            input.into(),
            MockOutputs::Many(outputs.into_iter().map(Into::into).collect()),
        );
        self
    }
}

/// What a mock fine-tuning call was asked to do.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneRecord {
    pub train_examples: usize,
    pub validation_examples: usize,
    pub per_task: BTreeMap<String, usize>,
    pub config: FinetuneConfig,
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    fixture: MockFixture,
    source: Option<String>,
    finetunes: Vec<FinetuneRecord>,
}

impl MockBackend {
    pub fn new(fixture: MockFixture) -> Self {
        Self {
            fixture,
            source: None,
            finetunes: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut mock = Self::from_json(&std::fs::read_to_string(path)?)?;
        mock.source = Some(path.display().to_string());
        Ok(mock)
    }

    pub fn fixture(&self) -> &MockFixture {
        &self.fixture
    }

    pub fn finetune_calls(&self) -> &[FinetuneRecord] {
        &self.finetunes
    }

    fn lookup(&self, req: &GenerationRequest) -> GenerationResult {
        let listed = self
            .fixture
            .map
            .get(&req.input_text)
            .map(MockOutputs::as_slice)
            .unwrap_or_default();
        let outputs = (0..req.num_return_sequences)
            .map(|i| match listed.get(i) {
                Some(text) => Generation {
                    text: text.clone(),
                    log_likelihood: -(i as f64),
                },
                None => Generation {
                    text: self.fixture.fallback.clone(),
                    log_likelihood: f64::NEG_INFINITY,
                },
            })
            .collect();
        GenerationResult { outputs }
    }
}

impl Seq2SeqBackend for MockBackend {
    fn identity(&self) -> String {
        match &self.source {
            Some(path) => format!("mock:{path}"),
            None => "mock:".to_string(),
        }
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>> {
        validate_requests(requests)?;
        Ok(requests.iter().map(|r| self.lookup(r)).collect())
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog> {
        let mut per_task = BTreeMap::new();
        for ex in train {
            let name = match ex.task {
                Task::Ae => "ae",
                Task::Qg => "qg",
                Task::End2end => "end2end",
            };
            *per_task.entry(name.to_string()).or_insert(0) += 1;
        }
        self.finetunes.push(FinetuneRecord {
            train_examples: train.len(),
            validation_examples: validation.len(),
            per_task,
            config: cfg.clone(),
        });
        Ok(TrainingLog::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_contract() {
        let mut mock = MockBackend::from_json(r#"{"map": {"x": "y"}, "fallback": ""}"#).unwrap();
        let out = mock.generate(&[GenerationRequest::new("x", 4)]).unwrap();
        assert_eq!(
            out[0].outputs,
            vec![Generation {
                text: "y".into(),
                log_likelihood: 0.0
            }]
        );
    }

    #[test]
    fn unknown_input_gives_sentinel() {
        let mut mock = MockBackend::from_json(r#"{"map": {"x": "y"}, "fallback": ""}"#).unwrap();
        let out = mock.generate(&[GenerationRequest::new("nope", 4)]).unwrap();
        assert_eq!(out[0].outputs.len(), 1);
        assert_eq!(out[0].outputs[0].text, "");
        assert_eq!(out[0].outputs[0].log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn multiple_returns_are_ordered() {
        let mut mock =
            MockBackend::from_json(r#"{"map": {"x": ["best", "second"]}}"#).unwrap();
        let mut req = GenerationRequest::new("x", 4);
        req.num_beams = 2;
        req.num_return_sequences = 2;
        let out = mock.generate(&[req.clone()]).unwrap();
        let texts: Vec<_> = out[0].outputs.iter().map(|g| g.text.as_str()).collect();
        assert_eq!(texts, vec!["best", "second"]);
        assert!(out[0].outputs[0].log_likelihood >= out[0].outputs[1].log_likelihood);

        // padding keeps the length and ordering invariants
        let out = mock.generate(&[req.with_returns(3)]).unwrap();
        assert_eq!(out[0].outputs.len(), 3);
        assert_eq!(out[0].outputs[2].log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn results_align_with_requests() {
        let mut fixture = MockFixture::default();
        fixture.insert("a", "1").insert("b", "2").insert("c", "3");
        let mut mock = MockBackend::new(fixture);
        let reqs: Vec<_> = ["c", "a", "zz", "b"]
            .iter()
            .map(|s| GenerationRequest::new(*s, 4))
            .collect();
        let out = mock.generate(&reqs).unwrap();
        let texts: Vec<_> = out.iter().map(|r| r.outputs[0].text.as_str()).collect();
        assert_eq!(texts, vec!["3", "1", "", "2"]);
        assert_eq!(mock.generate(&reqs).unwrap(), out);
    }
}
