use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qag_playground::{router, AppState, ModelPool, ServiceConfig};
use qagkit::finetune::{TrainExample, TrainingLog};
use qagkit::{
    FinetuneConfig, GenerationRequest, GenerationResult, MockBackend, MockFixture, QAGDataset, Seq2SeqBackend, Split,
};
use serde_json::{json, Value};
use tower::ServiceExt;

const PARAGRAPH: &str = "Bob met Ann in Paris. Ann wrote a book.";
const FLAT: &str = "question: Who met Ann in Paris?, answer: Bob | question: What did Ann write?, answer: a book | garbage";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn e2e_mock() -> MockBackend {
    let mut f = MockFixture::default();
    f.insert(PARAGRAPH, FLAT);
    MockBackend::new(f)
}

fn app_with(config: ServiceConfig, models: ModelPool) -> (Router, AppState) {
    let state = AppState::new(config, models).unwrap();
    (router(state.clone()), state)
}

fn app() -> Router {
    let mut pool = ModelPool::new(4);
    pool.insert("e2e", "mock:inline", Box::new(e2e_mock()));
    app_with(ServiceConfig::default(), pool).0
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = send_raw(app, method, uri, body.map(|b| b.to_string())).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn send_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn generate_e2e(app: &Router) -> Value {
    let (status, body) = send(app, "POST", "/generate", Some(json!({"context": PARAGRAPH, "strategy": "end2end"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

#[tokio::test]
async fn end2end_pairs_are_tagged() {
    let body = generate_e2e(&app()).await;
    let pairs = body["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0]["question"], "Who met Ann in Paris?");
    assert_eq!(pairs[0]["answer"], "Bob");
    assert!(pairs.iter().all(|p| p["strategy"] == "end2end"));
    assert_eq!(body["dropped_segments"], 1);
    assert!(body["timing_ms"].is_u64());
    assert_eq!(body["models"], json!(["e2e"]));
}

#[tokio::test]
async fn empty_or_oversized_context_is_rejected() {
    let app = app();
    let (status, body) = send(&app, "POST", "/generate", Some(json!({"context": "  ", "strategy": "end2end"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("empty"));

    let long = "word ".repeat(3000);
    let (status, _) = send(&app, "POST", "/generate", Some(json!({"context": long, "strategy": "end2end"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = send(
        &app,
        "POST",
        "/generate",
        Some(json!({"context": PARAGRAPH, "strategy": "end2end", "decoding": {"num_beams": 0}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn no_model_loaded_is_503() {
    let (empty, _) = app_with(ServiceConfig::default(), ModelPool::new(2));
    let (status, _) = send(&empty, "POST", "/generate", Some(json!({"context": PARAGRAPH, "strategy": "end2end"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    let (status, body) = send(
        &app(),
        "POST",
        "/generate",
        Some(json!({"context": PARAGRAPH, "strategy": "end2end", "models": ["missing"]})),
    )
    .await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert!(body["remediation"].as_str().unwrap().contains("e2e"));
}

#[tokio::test]
async fn pipeline_with_one_model_is_409() {
    let (status, body) = send(&app(), "POST", "/generate", Some(json!({"context": PARAGRAPH, "strategy": "pipeline"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["remediation"].as_str().unwrap().contains("second model"));
}

#[tokio::test]
async fn pipeline_with_two_models() {
    let mut pool = ModelPool::new(2);
    pool.load("ae", &format!("mock:{}", fixture("mock_ae.json").display())).unwrap();
    pool.load("qg", &format!("mock:{}", fixture("mock_qg.json").display())).unwrap();
    let (app, _) = app_with(ServiceConfig::default(), pool);
    let context = "Bruno planted the garden in Osaka. Emeka fixed the router in Nairobi.";
    let (status, body) = send(
        &app,
        "POST",
        "/generate",
        Some(json!({"context": context, "strategy": "pipeline", "models": ["ae", "qg"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let pairs = body["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[1]["answer"], "Emeka");
    assert_eq!(pairs[1]["source_sentence_index"], 1);
    assert!(pairs.iter().all(|p| p["strategy"] == "pipeline"));
}

#[tokio::test]
async fn decisions_update_the_session() {
    let app = app();
    let sid = generate_e2e(&app).await["session_id"].as_str().unwrap().to_string();
    let uri = format!("/session/{sid}/decision");

    let (status, s) = send(&app, "POST", &uri, Some(json!({"pair_id": "p1", "action": "accept"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["pairs"][0]["status"], "accepted");

    let (status, s) = send(
        &app,
        "POST",
        &uri,
        Some(json!({"pair_id": "p2", "action": "edit", "answer": "a novel"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["pairs"][1]["current"]["answer"], "a novel");
    assert_eq!(s["pairs"][1]["original"]["answer"], "a book");
    assert_eq!(s["pairs"][1]["history"][0]["decision"]["action"], "edit");

    let (status, _) = send(&app, "POST", &uri, Some(json!({"pair_id": "p2", "action": "edit", "answer": "x | y"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = send(&app, "POST", &uri, Some(json!({"pair_id": "p7", "action": "reject"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "POST", "/session/nope/decision", Some(json!({"pair_id": "p1", "action": "accept"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, s) = send(&app, "GET", &format!("/session/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["pairs"][0]["history"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn regenerate_keeps_review_state() {
    let app = app();
    let sid = generate_e2e(&app).await["session_id"].as_str().unwrap().to_string();
    send(&app, "POST", &format!("/session/{sid}/decision"), Some(json!({"pair_id": "p1", "action": "reject"}))).await;
    let (status, body) = send(
        &app,
        "POST",
        "/generate",
        Some(json!({"session_id": sid, "context": PARAGRAPH, "strategy": "end2end", "decoding": {"num_beams": 2}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["pairs"][0]["id"], "p1");
    let (_, s) = send(&app, "GET", &format!("/session/{sid}"), None).await;
    assert_eq!(s["pairs"].as_array().unwrap().len(), 2);
    assert_eq!(s["pairs"][0]["status"], "rejected");
    assert_eq!(s["decoding"]["num_beams"], 2);

    let (status, _) = send(
        &app,
        "POST",
        "/generate",
        Some(json!({"session_id": sid, "context": "Another text.", "strategy": "end2end"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn export_holds_accepted_pairs_only() {
    let app = app();
    let sid = generate_e2e(&app).await["session_id"].as_str().unwrap().to_string();
    let export = format!("/session/{sid}/export?format=jsonl");

    let (status, bytes) = send_raw(&app, "GET", &export, None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert!(bytes.is_empty());

    let uri = format!("/session/{sid}/decision");
    send(&app, "POST", &uri, Some(json!({"pair_id": "p1", "action": "reject"}))).await;
    send(&app, "POST", &uri, Some(json!({"pair_id": "p2", "action": "edit", "question": "What did Ann produce?"}))).await;
    send(&app, "POST", &uri, Some(json!({"pair_id": "p2", "action": "accept"}))).await;

    let (status, bytes) = send_raw(&app, "GET", &export, None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(bytes).unwrap();
    let ds = QAGDataset::read_jsonl(Cursor::new(text.clone()), Split::Train, Path::new("export")).unwrap();
    assert_eq!(ds.len(), 1);
    let pairs = &ds.entries()[0].pairs;
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0].question(), "What did Ann produce?");
    assert_eq!(ds.entries()[0].context.text(), PARAGRAPH);

    let (status, _) = send_raw(&app, "GET", &format!("/session/{sid}/export?format=csv"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // import then export again: same bytes apart from the session id
    let (status, body) = send_raw(&app, "POST", "/session/import", Some(text.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Value = serde_json::from_slice(&body).unwrap();
    let new_id = ids["session_ids"][0].as_str().unwrap();
    let (status, again) = send_raw(&app, "GET", &format!("/session/{new_id}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    let again = QAGDataset::read_jsonl(Cursor::new(again), Split::Train, Path::new("again")).unwrap();
    assert_eq!(again.entries()[0].pairs, ds.entries()[0].pairs);
    assert_eq!(again.entries()[0].context.text(), PARAGRAPH);
}

#[tokio::test]
async fn long_context_returns_a_job() {
    let config = ServiceConfig {
        sync_char_limit: 10,
        ..ServiceConfig::default()
    };
    let mut pool = ModelPool::new(2);
    pool.insert("e2e", "mock:inline", Box::new(e2e_mock()));
    let (app, _) = app_with(config, pool);
    let (status, token) = send(&app, "POST", "/generate", Some(json!({"context": PARAGRAPH, "strategy": "end2end"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let url = token["status_url"].as_str().unwrap().to_string();
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let (status, job) = send(&app, "GET", &url, None).await;
        if status == StatusCode::OK {
            assert_eq!(job["status"], "done");
            assert_eq!(job["result"]["pairs"].as_array().unwrap().len(), 2);
            assert_eq!(job["result"]["session_id"], token["session_id"]);
            break;
        }
        assert_eq!(status, StatusCode::ACCEPTED);
        assert!(Instant::now() < deadline, "job never finished");
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let (status, _) = send(&app, "GET", "/jobs/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

struct Slow {
    inner: MockBackend,
    delay: Duration,
}

impl Seq2SeqBackend for Slow {
    fn identity(&self) -> String {
        "slow".into()
    }

    fn generate(&mut self, requests: &[GenerationRequest]) -> qagkit::Result<Vec<GenerationResult>> {
        std::thread::sleep(self.delay);
        self.inner.generate(requests)
    }

    fn finetune(
        &mut self,
        train: &[TrainExample],
        validation: &[TrainExample],
        cfg: &FinetuneConfig,
    ) -> qagkit::Result<TrainingLog> {
        self.inner.finetune(train, validation, cfg)
    }
}

fn slow_pool(depth: usize) -> ModelPool {
    let mut pool = ModelPool::new(depth);
    pool.insert(
        "slow",
        "slow",
        Box::new(Slow {
            inner: e2e_mock(),
            delay: Duration::from_millis(400),
        }),
    );
    pool.insert("fast", "mock:inline", Box::new(e2e_mock()));
    pool
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn full_queue_is_429() {
    let (app, _) = app_with(ServiceConfig::default(), slow_pool(1));
    let body = json!({"context": PARAGRAPH, "strategy": "end2end", "models": ["slow"]});
    let first = tokio::spawn({
        let app = app.clone();
        let body = body.clone();
        async move { send(&app, "POST", "/generate", Some(body)).await.0 }
    });
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (status, err) = send(&app, "POST", "/generate", Some(body)).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS, "{err}");
    assert_eq!(first.await.unwrap(), StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_on_other_models_are_not_blocked() {
    let (app, _) = app_with(ServiceConfig::default(), slow_pool(2));
    let slow = tokio::spawn({
        let app = app.clone();
        async move {
            send(
                &app,
                "POST",
                "/generate",
                Some(json!({"context": PARAGRAPH, "strategy": "end2end", "models": ["slow"]})),
            )
            .await
            .0
        }
    });
    tokio::time::sleep(Duration::from_millis(50)).await;
    let started = Instant::now();
    let (status, _) = send(
        &app,
        "POST",
        "/generate",
        Some(json!({"context": PARAGRAPH, "strategy": "end2end", "models": ["fast"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(started.elapsed() < Duration::from_millis(300), "{:?}", started.elapsed());
    assert_eq!(slow.await.unwrap(), StatusCode::OK);
}

#[tokio::test]
async fn sessions_persist_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let mut pool = ModelPool::new(2);
    pool.insert("e2e", "mock:inline", Box::new(e2e_mock()));
    let (app, _) = app_with(config.clone(), pool);
    let sid = generate_e2e(&app).await["session_id"].as_str().unwrap().to_string();
    send(&app, "POST", &format!("/session/{sid}/decision"), Some(json!({"pair_id": "p2", "action": "accept"}))).await;

    let (_, restored) = app_with(config, ModelPool::new(2));
    let s = restored.session(&sid).unwrap();
    assert_eq!(s.accepted().len(), 1);
    assert_eq!(s.accepted()[0].answer(), "a book");
}

#[tokio::test]
async fn spec_and_cors() {
    let app = app();
    let (status, doc) = send(&app, "GET", "/spec", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["openapi"], "3.0.3");
    for path in ["/generate", "/session/{id}/decision", "/session/{id}/export"] {
        assert!(doc["paths"][path].is_object(), "{path} missing");
    }

    let req = Request::builder()
        .method("OPTIONS")
        .uri("/generate")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));

    let mut pool = ModelPool::new(1);
    pool.insert("e2e", "mock:inline", Box::new(e2e_mock()));
    let config = ServiceConfig {
        cors_origin: Some("http://ui.example".into()),
        ..ServiceConfig::default()
    };
    let (app, _) = app_with(config, pool);
    let req = Request::builder()
        .uri("/models")
        .header("origin", "http://ui.example")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://ui.example");
}
