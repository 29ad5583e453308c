//! QA-based evaluation: train a reader on generated pairs per domain, score it
//! on held-out questions.
//!
//! cargo run -p qagkit --example extrinsic_eval

use std::path::PathBuf;

use qagkit::eval::{extrinsic_eval, read_test_set, split_by_domain, synthesize_dataset, EvalReport, MockReaderTrainer, ReaderGrid};
use qagkit::types::read_contexts;
use qagkit::{MockBackend, QagDriver, Split, Strategy, StrategyConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let contexts = read_contexts(fixture("contexts.jsonl"))?;
    let test = read_test_set(fixture("test.jsonl"))?;
    let (train_ctx, val_ctx) = contexts.split_at(40);

    let mut ae = MockBackend::from_file(fixture("mock_ae.json"))?;
    let mut qg = MockBackend::from_file(fixture("mock_qg.json"))?;
    let mut e2e = MockBackend::from_file(fixture("mock_end2end.json"))?;

    let mut rows = Vec::new();
    for strategy in [Strategy::Pipeline, Strategy::End2end] {
        let mut driver = match strategy {
            Strategy::Pipeline => QagDriver::Pipeline { ae: &mut ae, qg: &mut qg },
            _ => QagDriver::End2end(&mut e2e),
        };
        let cfg = StrategyConfig::new(strategy);
        let train = synthesize_dataset(train_ctx, &mut driver, &cfg, Split::Train)?.dataset;
        let validation = synthesize_dataset(val_ctx, &mut driver, &cfg, Split::Validation)?.dataset;
        let domains = split_by_domain(&train, &validation, &test)?;
        let report = extrinsic_eval(&domains, &mut MockReaderTrainer::new(), &ReaderGrid::default())?;
        rows.push((strategy.as_str(), report));
    }
    let table: Vec<(&str, &EvalReport)> = rows.iter().map(|(l, r)| (*l, r)).collect();
    print!("{}", EvalReport::markdown_table(&table));
    Ok(())
}
