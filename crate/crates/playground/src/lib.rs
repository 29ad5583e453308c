//! HTTP service behind the QAG playground: generate pairs for a paragraph,
//! review them in a session, and export the accepted ones as a dataset.
//!
//! ```no_run
//! # async fn run() -> std::io::Result<()> {
//! use qag_playground::{router, AppState, ModelPool, ServiceConfig};
//!
//! let mut models = ModelPool::new(4);
//! models.insert("e2e", "mock:", Box::new(qagkit::MockBackend::empty()));
//! let state = AppState::new(ServiceConfig::default(), models)?;
//! let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
//! axum::serve(listener, router(state)).await
//! # }
//! ```

mod models;
mod openapi;
mod session;

use std::collections::HashMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qagkit::{Context, Generated, QAGDataset, QAPair, QagDriver, Split, Strategy, StrategyConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use models::{LoadedModel, ModelInfo, ModelPool};
pub use openapi::openapi_document;
pub use session::{
    DecisionError, Decision, DecodingParams, HistoryEntry, PairStatus, SessionPair, SessionState, SessionStore,
};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Longest accepted context, in characters.
    pub char_limit: usize,
    /// Contexts longer than this run as background jobs.
    pub sync_char_limit: usize,
    /// Pending generate calls allowed per model before 429.
    pub queue_depth: usize,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
    pub persist_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            char_limit: 10_000,
            sync_char_limit: 2_048,
            queue_depth: 4,
            cors_origin: None,
            persist_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Done { result: GenerateResponse },
    Failed { code: u16, error: String },
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    models: ModelPool,
    sessions: Mutex<HashMap<String, SessionState>>,
    jobs: Mutex<HashMap<String, JobStatus>>,
    store: SessionStore,
    counter: AtomicU64,
}

impl AppState {
    /// Restores persisted sessions when `config.persist_dir` is set.
    pub fn new(config: ServiceConfig, models: ModelPool) -> std::io::Result<Self> {
        let store = match &config.persist_dir {
            Some(dir) => SessionStore::on_disk(dir)?,
            None => SessionStore::memory(),
        };
        let sessions: HashMap<_, _> = store.load_all()?.into_iter().collect();
        if !sessions.is_empty() {
            log::info!("restored {} sessions", sessions.len());
        }
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                models,
                sessions: Mutex::new(sessions),
                jobs: Mutex::new(HashMap::new()),
                store,
                counter: AtomicU64::new(0),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn models(&self) -> &ModelPool {
        &self.inner.models
    }

    pub fn session(&self, id: &str) -> Option<SessionState> {
        self.inner.sessions.lock().unwrap().get(id).cloned()
    }

    fn fresh_id(&self, prefix: &str) -> String {
        let n = self.inner.counter.fetch_add(1, Ordering::Relaxed);
        format!("{prefix}-{:x}-{n}", session::now_ms())
    }

    fn update_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionState) -> Result<T, ApiError>,
    ) -> Result<(T, SessionState), ApiError> {
        let mut sessions = self.inner.sessions.lock().unwrap();
        let session = sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))?;
        let out = f(session)?;
        let snapshot = session.clone();
        drop(sessions);
        self.persist(&snapshot);
        Ok((out, snapshot))
    }

    fn persist(&self, session: &SessionState) {
        if let Err(e) = self.inner.store.save(session) {
            log::error!("could not persist session {}: {e}", session.id);
        }
    }
}

/// JSON error body: `{"error": ..., "remediation": ...}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub remediation: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            remediation: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn remedy(mut self, text: impl Into<String>) -> Self {
        self.remediation = Some(text.into());
        self
    }
}

impl From<qagkit::Error> for ApiError {
    fn from(e: qagkit::Error) -> Self {
        use qagkit::Error as E;
        let status = match &e {
            E::Validation(_) | E::EmptyInput(_) | E::OutOfRange { .. } | E::AnswerNotFound { .. } => {
                StatusCode::BAD_REQUEST
            }
            E::Sentence { source, .. } if matches!(**source, E::Validation(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::BAD_GATEWAY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(r) = self.remediation {
            body["remediation"] = Value::String(r);
        }
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct GenerateRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub context: String,
    pub strategy: Strategy,
    /// Model names; pipeline takes `[ae, qg]`. Empty uses the pool's load order.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub decoding: DecodingParams,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairView {
    pub id: String,
    #[serde(flatten)]
    pub pair: QAPair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GenerateResponse {
    pub session_id: String,
    pub strategy: Strategy,
    pub models: Vec<String>,
    pub pairs: Vec<PairView>,
    pub dropped_segments: usize,
    pub filtered: usize,
    pub timing_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    pub pair_id: String,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

pub fn router(state: AppState) -> Router {
    let origin = match &state.config().cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {o:?}");
                AllowOrigin::from(Any)
            }
        },
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/generate", post(generate))
        .route("/jobs/{id}", get(job))
        .route("/models", get(list_models))
        .route("/session/import", post(import))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/decision", post(decide))
        .route("/session/{id}/export", get(export))
        .route("/spec", get(spec))
        .layer(cors)
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn spec() -> Json<Value> {
    Json(openapi_document())
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(state.models().info())
}

struct Plan {
    session_id: String,
    context: Context,
    strategy: Strategy,
    models: Vec<LoadedModel>,
    cfg: StrategyConfig,
}

fn resolve_models(state: &AppState, req: &GenerateRequest) -> Result<Vec<LoadedModel>, ApiError> {
    let pool = state.models();
    if pool.is_empty() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model is loaded")
            .remedy("start the service with at least one model"));
    }
    let wanted = if req.strategy == Strategy::Pipeline { 2 } else { 1 };
    let names = if req.models.is_empty() {
        pool.names().into_iter().take(wanted).collect()
    } else {
        req.models.clone()
    };
    if req.strategy == Strategy::Pipeline && (names.len() < 2 || names[0] == names[1]) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("pipeline needs two distinct models (answer extraction, question generation); got {names:?}"),
        )
        .remedy("load a second model and pass both as \"models\": [ae, qg], or use strategy end2end or multitask"));
    }
    if names.len() != wanted {
        return Err(ApiError::bad_request(format!(
            "{} takes {wanted} model(s), got {}",
            req.strategy,
            names.len()
        )));
    }
    names
        .iter()
        .map(|n| {
            pool.get(n).cloned().ok_or_else(|| {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("model {n:?} is not loaded"))
                    .remedy(format!("loaded models: {:?}", pool.names()))
            })
        })
        .collect()
}

fn plan(state: &AppState, req: GenerateRequest) -> Result<Plan, ApiError> {
    if req.context.trim().is_empty() {
        return Err(ApiError::bad_request("context is empty"));
    }
    let chars = req.context.chars().count();
    let limit = state.config().char_limit;
    if chars > limit {
        return Err(ApiError::bad_request(format!("context has {chars} characters; the limit is {limit}")));
    }
    if req.strategy == Strategy::Gold {
        return Err(ApiError::bad_request("gold is not a generation strategy"));
    }
    let mut cfg = StrategyConfig::new(req.strategy);
    if let Some(b) = req.decoding.num_beams {
        cfg.num_beams = b;
    }
    if let Some(n) = req.decoding.answers_per_sentence {
        cfg.answers_per_sentence = n;
    }
    if let Some(r) = req.decoding.require_answer_in_context {
        cfg.require_answer_in_context = r;
    }
    cfg.validate()?;
    let models = resolve_models(state, &req)?;

    let session_id = match &req.session_id {
        Some(id) if id.trim().is_empty() || id.contains(['/', '\\', '.']) => {
            return Err(ApiError::bad_request(format!("invalid session id {id:?}")));
        }
        Some(id) => id.clone(),
        None => state.fresh_id("s"),
    };
    {
        let mut sessions = state.inner.sessions.lock().unwrap();
        let model_names = models.iter().map(|m| m.name.clone()).collect();
        match sessions.get_mut(&session_id) {
            Some(s) if s.context != req.context => {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("session {session_id:?} holds a different context"),
                )
                .remedy("omit session_id to start a new session"));
            }
            Some(s) => {
                s.strategy = req.strategy;
                s.models = model_names;
                s.decoding = req.decoding.clone();
            }
            None => {
                let mut s =
                    SessionState::new(session_id.clone(), req.context.clone(), req.strategy, model_names, req.decoding.clone());
                s.domain = req.domain.clone();
                sessions.insert(session_id.clone(), s);
            }
        }
    }
    let mut context = Context::new(session_id.clone(), req.context);
    if let Some(d) = req.domain {
        context = context.with_domain(d);
    }
    Ok(Plan {
        session_id,
        context,
        strategy: req.strategy,
        models,
        cfg,
    })
}

fn run_driver(plan: &Plan) -> Result<Generated, ApiError> {
    let poisoned = |_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model handle poisoned by an earlier panic");
    let out = match plan.strategy {
        Strategy::Pipeline => {
            // Names are distinct, so locking in name order cannot deadlock.
            let (ae, qg) = (&plan.models[0], &plan.models[1]);
            let (mut ae_guard, mut qg_guard) = if ae.name < qg.name {
                let a = ae.handle.lock().map_err(poisoned)?;
                (a, qg.handle.lock().map_err(poisoned)?)
            } else {
                let q = qg.handle.lock().map_err(poisoned)?;
                (ae.handle.lock().map_err(poisoned)?, q)
            };
            QagDriver::Pipeline {
                ae: &mut **ae_guard,
                qg: &mut **qg_guard,
            }
            .generate(&plan.context, &plan.cfg)
        }
        Strategy::Multitask => {
            let mut m = plan.models[0].handle.lock().map_err(poisoned)?;
            QagDriver::Multitask(&mut **m).generate(&plan.context, &plan.cfg)
        }
        _ => {
            let mut m = plan.models[0].handle.lock().map_err(poisoned)?;
            QagDriver::End2end(&mut **m).generate(&plan.context, &plan.cfg)
        }
    };
    Ok(out?)
}

async fn execute(state: AppState, plan: Plan) -> Result<GenerateResponse, ApiError> {
    let started = Instant::now();
    let plan = Arc::new(plan);
    let worker = plan.clone();
    let generated = tokio::task::spawn_blocking(move || run_driver(&worker))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("generation task failed: {e}")))??;
    let (ids, _) = state.update_session(&plan.session_id, |s| Ok(s.add_generated(generated.pairs.clone())))?;
    let pairs = ids
        .into_iter()
        .zip(generated.pairs)
        .map(|(id, pair)| PairView { id, pair })
        .collect();
    Ok(GenerateResponse {
        session_id: plan.session_id.clone(),
        strategy: plan.strategy,
        models: plan.models.iter().map(|m| m.name.clone()).collect(),
        pairs,
        dropped_segments: generated.dropped_segments,
        filtered: generated.filtered,
        timing_ms: started.elapsed().as_millis() as u64,
    })
}

async fn generate(State(state): State<AppState>, Json(req): Json<GenerateRequest>) -> Result<Response, ApiError> {
    let plan = plan(&state, req)?;
    let mut permits = Vec::new();
    for m in &plan.models {
        match m.try_enqueue() {
            Some(p) => permits.push(p),
            None => {
                return Err(ApiError::new(
                    StatusCode::TOO_MANY_REQUESTS,
                    format!("the queue for model {:?} is full", m.name),
                )
                .remedy("retry after the pending requests finish"));
            }
        }
    }
    if plan.context.char_len() <= state.config().sync_char_limit {
        let out = execute(state, plan).await;
        drop(permits);
        return Ok(Json(out?).into_response());
    }
    let job_id = state.fresh_id("job");
    state.inner.jobs.lock().unwrap().insert(job_id.clone(), JobStatus::Running);
    let session_id = plan.session_id.clone();
    let bg = state.clone();
    let id = job_id.clone();
    tokio::spawn(async move {
        let status = match execute(bg.clone(), plan).await {
            Ok(result) => JobStatus::Done { result },
            Err(e) => JobStatus::Failed {
                code: e.status.as_u16(),
                error: e.message,
            },
        };
        drop(permits);
        bg.inner.jobs.lock().unwrap().insert(id, status);
    });
    let body = json!({
        "job_id": job_id,
        "session_id": session_id,
        "status_url": format!("/jobs/{job_id}"),
    });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn job(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let jobs = state.inner.jobs.lock().unwrap();
    let status = jobs
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job {id:?}")))?;
    let code = match status {
        JobStatus::Running => StatusCode::ACCEPTED,
        _ => StatusCode::OK,
    };
    Ok((code, Json(status)).into_response())
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionState>, ApiError> {
    state
        .session(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
}

async fn decide(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<DecisionRequest>,
) -> Result<Json<SessionState>, ApiError> {
    let (_, session) = state.update_session(&id, |s| {
        s.decide(&req.pair_id, req.decision.clone()).map_err(|e| match e {
            DecisionError::UnknownPair => {
                ApiError::new(StatusCode::NOT_FOUND, format!("unknown pair {:?} in session {id:?}", req.pair_id))
            }
            DecisionError::Invalid(m) => ApiError::bad_request(m),
        })
    })?;
    Ok(Json(session))
}

async fn export(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let format = q.format.as_deref().unwrap_or("jsonl");
    if format != "jsonl" {
        return Err(ApiError::bad_request(format!("unsupported export format {format:?}; use jsonl")));
    }
    let session = state
        .session(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))?;
    match session.export() {
        None => Ok(StatusCode::NO_CONTENT.into_response()),
        Some(ds) => Ok((
            [
                (header::CONTENT_TYPE, "application/jsonl".to_string()),
                (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{id}.jsonl\"")),
            ],
            ds.to_jsonl_string(),
        )
            .into_response()),
    }
}

/// One new session per JSONL entry, every pair accepted.
async fn import(State(state): State<AppState>, body: String) -> Result<Json<Value>, ApiError> {
    let ds = QAGDataset::read_jsonl(Cursor::new(body), Split::Train, Path::new("<request body>"))?;
    if ds.is_empty() {
        return Err(ApiError::bad_request("no entries to import"));
    }
    let mut ids = Vec::new();
    for entry in ds.entries() {
        let session = SessionState::from_import(state.fresh_id("s"), &entry.context, &entry.pairs);
        state.persist(&session);
        ids.push(session.id.clone());
        state.inner.sessions.lock().unwrap().insert(session.id.clone(), session);
    }
    Ok(Json(json!({ "session_ids": ids })))
}
