//! Review sessions: generated pairs plus an append-only log of decisions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qagkit::{Context, QAGDataset, QAPair, Split, Strategy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Edit {
        #[serde(default)]
        question: Option<String>,
        #[serde(default)]
        answer: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub decision: Decision,
    pub at_unix_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPair {
    pub id: String,
    /// As generated; never modified.
    pub original: QAPair,
    /// After the latest edit.
    pub current: QAPair,
    pub status: PairStatus,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecodingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_beams: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers_per_sentence: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require_answer_in_context: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub strategy: Strategy,
    pub models: Vec<String>,
    pub decoding: DecodingParams,
    pub pairs: Vec<SessionPair>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum DecisionError {
    UnknownPair,
    Invalid(String),
}

pub fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl SessionState {
    pub fn new(id: String, context: String, strategy: Strategy, models: Vec<String>, decoding: DecodingParams) -> Self {
        Self {
            id,
            context,
            domain: None,
            strategy,
            models,
            decoding,
            pairs: Vec::new(),
        }
    }

    /// Appends freshly generated pairs. A pair already in the session keeps
    /// its id and review status. Returns one id per input pair.
    pub fn add_generated(&mut self, pairs: Vec<QAPair>) -> Vec<String> {
        let mut ids = Vec::new();
        for pair in pairs {
            let seen = self
                .pairs
                .iter()
                .find(|p| p.original.question() == pair.question() && p.original.answer() == pair.answer());
            if let Some(p) = seen {
                ids.push(p.id.clone());
                continue;
            }
            let id = format!("p{}", self.pairs.len() + 1);
            self.pairs.push(SessionPair {
                id: id.clone(),
                original: pair.clone(),
                current: pair,
                status: PairStatus::Pending,
                history: Vec::new(),
            });
            ids.push(id);
        }
        ids
    }

    pub fn decide(&mut self, pair_id: &str, decision: Decision) -> Result<(), DecisionError> {
        let pair = self
            .pairs
            .iter_mut()
            .find(|p| p.id == pair_id)
            .ok_or(DecisionError::UnknownPair)?;
        match &decision {
            Decision::Accept => pair.status = PairStatus::Accepted,
            Decision::Reject => pair.status = PairStatus::Rejected,
            Decision::Edit { question, answer } => {
                if question.is_none() && answer.is_none() {
                    return Err(DecisionError::Invalid("edit needs a question or an answer".into()));
                }
                let q = question.as_deref().unwrap_or(pair.current.question());
                let a = answer.as_deref().unwrap_or(pair.current.answer());
                let mut edited = QAPair::new(q, a, pair.current.strategy())
                    .map_err(|e| DecisionError::Invalid(e.to_string()))?;
                if let Some(i) = pair.current.source_sentence_index() {
                    edited = edited.with_source_sentence(i);
                }
                pair.current = edited;
            }
        }
        pair.history.push(HistoryEntry {
            decision,
            at_unix_ms: now_ms(),
        });
        Ok(())
    }

    pub fn accepted(&self) -> Vec<QAPair> {
        self.pairs
            .iter()
            .filter(|p| p.status == PairStatus::Accepted)
            .map(|p| p.current.clone())
            .collect()
    }

    /// Accepted pairs as a one-entry dataset; `None` when nothing is accepted.
    pub fn export(&self) -> Option<QAGDataset> {
        let accepted = self.accepted();
        if accepted.is_empty() {
            return None;
        }
        let mut context = Context::new(self.id.clone(), self.context.clone());
        if let Some(d) = &self.domain {
            context = context.with_domain(d.clone());
        }
        let mut ds = QAGDataset::new(Split::Train);
        ds.push(context, accepted);
        Some(ds)
    }

    /// A session whose pairs are all accepted, rebuilt from one dataset entry.
    pub fn from_import(id: String, context: &Context, pairs: &[QAPair]) -> Self {
        let strategy = pairs.first().map(|p| p.strategy()).unwrap_or(Strategy::Gold);
        let mut s = Self::new(id, context.text().to_string(), strategy, Vec::new(), DecodingParams::default());
        s.domain = context.domain().map(str::to_string);
        s.add_generated(pairs.to_vec());
        for p in &mut s.pairs {
            p.status = PairStatus::Accepted;
        }
        s
    }
}

/// Optional on-disk mirror: one `<id>.json` per session.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn memory() -> Self {
        Self { dir: None }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir) })
    }

    fn path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }

    pub fn save(&self, session: &SessionState) -> std::io::Result<()> {
        if let Some(dir) = &self.dir {
            let json = serde_json::to_vec_pretty(session).map_err(std::io::Error::other)?;
            fs::write(Self::path(dir, &session.id), json)?;
        }
        Ok(())
    }

    pub fn load_all(&self) -> std::io::Result<BTreeMap<String, SessionState>> {
        let mut out = BTreeMap::new();
        let Some(dir) = &self.dir else { return Ok(out) };
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match serde_json::from_slice::<SessionState>(&fs::read(&path)?) {
                Ok(s) => {
                    out.insert(s.id.clone(), s);
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(out)
    }
}
