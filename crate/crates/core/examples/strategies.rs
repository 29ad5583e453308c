//! Pipeline, multitask and end2end generation over the bundled mock models.
//!
//! cargo run -p qagkit --example strategies

use std::path::PathBuf;

use qagkit::types::read_contexts;
use qagkit::{MockBackend, QagDriver, StrategyConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let contexts = read_contexts(fixture("contexts.jsonl"))?;
    let ctx = &contexts[3];
    println!("{}\n", ctx.text());

    let mut ae = MockBackend::from_file(fixture("mock_ae.json"))?;
    let mut qg = MockBackend::from_file(fixture("mock_qg.json"))?;
    let mut multi = MockBackend::from_file(fixture("mock_multitask.json"))?;
    let mut e2e = MockBackend::from_file(fixture("mock_end2end.json"))?;

    let drivers = [
        QagDriver::Pipeline { ae: &mut ae, qg: &mut qg },
        QagDriver::Multitask(&mut multi),
        QagDriver::End2end(&mut e2e),
    ];
    for mut driver in drivers {
        let strategy = driver.strategy();
        let out = driver.generate(ctx, &StrategyConfig::new(strategy))?;
        println!("{strategy} ({} model(s)): {} pairs", driver.model_count(), out.pairs.len());
        for p in &out.pairs {
            let sentence = p.source_sentence_index().map_or("-".to_string(), |i| i.to_string());
            println!("  [{sentence}] {} -> {}", p.question(), p.answer());
        }
    }
    Ok(())
}
