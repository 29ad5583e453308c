//! Counting backend calls and models per strategy, relative to end2end.
//!
//! cargo run -p qagkit --example resource_profile

use std::path::PathBuf;

use qagkit::eval::{format_multiple, profile_resources, run_profiled};
use qagkit::types::{read_contexts, read_quadruples};
use qagkit::{MockBackend, QagDriver, Strategy, StrategyConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let contexts = read_contexts(fixture("contexts.jsonl"))?;
    let gold = read_quadruples(fixture("quads.jsonl"))?.len();
    let mut ae = MockBackend::from_file(fixture("mock_ae.json"))?;
    let mut qg = MockBackend::from_file(fixture("mock_qg.json"))?;
    let mut multi = MockBackend::from_file(fixture("mock_multitask.json"))?;
    let mut e2e = MockBackend::from_file(fixture("mock_end2end.json"))?;

    let mut runs = Vec::new();
    for mut driver in [
        QagDriver::End2end(&mut e2e),
        QagDriver::Multitask(&mut multi),
        QagDriver::Pipeline { ae: &mut ae, qg: &mut qg },
    ] {
        let cfg = StrategyConfig::new(driver.strategy());
        let (_, run) = run_profiled(&contexts, gold, &mut driver, &cfg)?;
        runs.push(run);
    }
    let profiles = profile_resources(&runs);
    let base = profiles.iter().find(|p| p.strategy == Strategy::End2end).expect("end2end profiled");
    for p in &profiles {
        let r = p.relative_to(base);
        println!(
            "{:<10} calls/paragraph {:>5.2}  models {}  pairs/gold {:.2}  cost {:>5} memory {:>3} pairs {:>5}",
            p.strategy.as_str(),
            p.backend_calls_per_paragraph,
            p.model_count,
            p.pairs_per_gold_pair,
            format_multiple(r.cost),
            format_multiple(r.memory),
            format_multiple(r.pairs)
        );
    }
    Ok(())
}
