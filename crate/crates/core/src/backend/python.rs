//! Bridge to Hugging Face encoder-decoder checkpoints through a Python worker
//! process speaking JSON lines over stdin/stdout.
//!
//! The interpreter is taken from `QAG_PYTHON` (default `python3`); model
//! weights are cached under `QAG_CACHE_DIR` when set.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::Deserialize;
use serde_json::{json, Value};

use super::{validate_requests, GenerationRequest, GenerationResult, Seq2SeqBackend};
use crate::error::{Error, Result};
use crate::finetune::{FinetuneConfig, TrainExample, TrainingLog};

/// Checkpoint names resolvable without the `hf:` prefix.
pub const REGISTRY_MODELS: &[&str] = &[
    "t5-small",
    "t5-base",
    "t5-large",
    "facebook/bart-base",
    "facebook/bart-large",
];

const WORKER_SOURCE: &str = include_str!("../../python/qag_worker.py");

/// A running worker process. Dropping it asks the worker to exit.
pub struct PythonWorker {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    _script: tempfile::TempPath,
}

impl PythonWorker {
    pub fn spawn() -> Result<Self> {
        let mut script = tempfile::Builder::new()
            .prefix("qag_worker")
            .suffix(".py")
            .tempfile()?;
        script.write_all(WORKER_SOURCE.as_bytes())?;
        let script = script.into_temp_path();
        let python = std::env::var("QAG_PYTHON").unwrap_or_else(|_| "python3".to_string());
        let mut child = Command::new(&python)
            .arg("-u")
            .arg(&script)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::BackendUnavailable(format!("cannot start {python}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout piped"));
        Ok(Self {
            child,
            stdin,
            stdout,
            _script: script,
        })
    }

    /// Sends one message and waits for its response. Error responses are
    /// returned as `Ok` so callers can interpret their extra fields.
    pub fn call(&mut self, message: &Value) -> Result<Value> {
        let mut line = serde_json::to_string(message)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::BackendUnavailable(format!("worker stdin closed: {e}")))?;
        let mut response = String::new();
        let n = self.stdout.read_line(&mut response)?;
        if n == 0 {
            return Err(Error::BackendUnavailable("worker exited unexpectedly".into()));
        }
        Ok(serde_json::from_str(&response)?)
    }

    /// Like [`call`](Self::call) but maps `{"error": ...}` responses to errors.
    pub fn call_ok(&mut self, message: &Value) -> Result<Value> {
        let resp = self.call(message)?;
        match resp.get("error").and_then(Value::as_str) {
            Some(msg) => Err(Error::BackendUnavailable(msg.to_string())),
            None => Ok(resp),
        }
    }
}

impl Drop for PythonWorker {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"{\"op\":\"exit\"}\n");
        let _ = self.stdin.flush();
        let _ = self.child.wait();
    }
}

pub struct PythonBackend {
    name: String,
    worker: PythonWorker,
}

impl PythonBackend {
    /// Starts a worker and loads `name` (a hub id or a local checkpoint directory).
    pub fn load(name: &str) -> Result<Self> {
        let mut worker = PythonWorker::spawn()?;
        worker.call_ok(&json!({"op": "load_seq2seq", "model": name}))?;
        Ok(Self {
            name: name.to_string(),
            worker,
        })
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    results: Vec<GenerationResult>,
}

#[derive(Deserialize)]
struct DivergenceInfo {
    epoch: usize,
    loss: String,
}

impl Seq2SeqBackend for PythonBackend {
    fn identity(&self) -> String {
        format!("hf:{}", self.name)
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> Result<Vec<GenerationResult>> {
        validate_requests(requests)?;
        let resp = self
            .worker
            .call(&json!({"op": "generate", "requests": requests}))?;
        if let Some(msg) = resp.get("error").and_then(Value::as_str) {
            let index = resp.get("index").and_then(Value::as_u64).unwrap_or(0) as usize;
            return Err(Error::Backend {
                index,
                message: msg.to_string(),
            });
        }
        let parsed: GenerateResponse = serde_json::from_value(resp)?;
        if parsed.results.len() != requests.len() {
            return Err(Error::BackendUnavailable(format!(
                "worker returned {} results for {} requests",
                parsed.results.len(),
                requests.len()
            )));
        }
        Ok(parsed.results)
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> Result<TrainingLog> {
        let resp = self.worker.call(&json!({
            "op": "finetune",
            "train": train,
            "validation": validation,
            "config": cfg,
        }))?;
        if let Some(div) = resp.get("divergence") {
            let info: DivergenceInfo = serde_json::from_value(div.clone())?;
            return Err(Error::Divergence {
                epoch: info.epoch,
                loss: info.loss.parse().unwrap_or(f64::NAN),
            });
        }
        if let Some(msg) = resp.get("error").and_then(Value::as_str) {
            return Err(Error::BackendUnavailable(msg.to_string()));
        }
        Ok(serde_json::from_value(resp)?)
    }

    fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.worker
            .call_ok(&json!({"op": "save", "path": dir.display().to_string()}))?;
        Ok(())
    }
}
