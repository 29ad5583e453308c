//! The playground service backed by the bundled mock models.
//!
//! cargo run -p qag-playground --example serve_mock -- 127.0.0.1:8080
//!
//! curl -s localhost:8080/models
//! curl -s localhost:8080/generate -H 'content-type: application/json' \
//!   -d '{"context": "Alice repaired the bicycle in Lisbon.", "strategy": "pipeline", "models": ["ae", "qg"]}'

use std::path::Path;

use qag_playground::{serve, AppState, ModelPool, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");

    let mut pool = ModelPool::new(4);
    for (name, file) in [
        ("ae", "mock_ae.json"),
        ("qg", "mock_qg.json"),
        ("multitask", "mock_multitask.json"),
        ("end2end", "mock_end2end.json"),
    ] {
        pool.load(name, &format!("mock:{}", fixtures.join(file).display()))?;
    }
    println!("models: {}", pool.names().join(", "));
    println!("openapi document at http://{addr}/spec");
    serve(&addr, AppState::new(ServiceConfig::default(), pool)?).await?;
    Ok(())
}
