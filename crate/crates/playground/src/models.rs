use std::sync::{Arc, Mutex};

use qagkit::{load_backend, ModelHandle};
use serde::Serialize;
use tokio::sync::{OwnedSemaphorePermit, Semaphore};

/// A loaded model: one handle, served strictly in order, with a bounded queue.
#[derive(Clone)]
pub struct LoadedModel {
    pub name: String,
    pub spec: String,
    pub(crate) handle: Arc<Mutex<ModelHandle>>,
    queue: Arc<Semaphore>,
    depth: usize,
}

impl LoadedModel {
    /// `None` when the queue is full.
    pub(crate) fn try_enqueue(&self) -> Option<OwnedSemaphorePermit> {
        self.queue.clone().try_acquire_owned().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub spec: String,
    pub queue_depth: usize,
    pub queued: usize,
}

/// Models in load order.
#[derive(Clone, Default)]
pub struct ModelPool {
    models: Vec<LoadedModel>,
    queue_depth: usize,
}

impl ModelPool {
    pub fn new(queue_depth: usize) -> Self {
        Self {
            models: Vec::new(),
            queue_depth: queue_depth.max(1),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, spec: impl Into<String>, handle: ModelHandle) -> &mut Self {
        let name = name.into();
        self.models.retain(|m| m.name != name);
        self.models.push(LoadedModel {
            name,
            spec: spec.into(),
            handle: Arc::new(Mutex::new(handle)),
            queue: Arc::new(Semaphore::new(self.queue_depth)),
            depth: self.queue_depth,
        });
        self
    }

    /// Loads `spec` (see [`qagkit::load_backend`]) under `name`.
    pub fn load(&mut self, name: &str, spec: &str) -> qagkit::Result<&mut Self> {
        let handle = load_backend(spec)?;
        Ok(self.insert(name, spec, handle))
    }

    /// Parses `name=spec`; a bare spec is its own name.
    pub fn load_assignment(&mut self, assignment: &str) -> qagkit::Result<&mut Self> {
        match assignment.split_once('=') {
            Some((name, spec)) => self.load(name.trim(), spec.trim()),
            None => self.load(assignment, assignment),
        }
    }

    pub fn get(&self, name: &str) -> Option<&LoadedModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.models.iter().map(|m| m.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn info(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|m| ModelInfo {
                name: m.name.clone(),
                spec: m.spec.clone(),
                queue_depth: m.depth,
                queued: m.depth - m.queue.available_permits(),
            })
            .collect()
    }
}
