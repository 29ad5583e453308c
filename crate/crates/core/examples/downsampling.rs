//! Downsampled evaluation: repeated seeded subsets, mean and 95% interval.
//!
//! cargo run -p qagkit --example downsampling

use std::path::PathBuf;

use qagkit::eval::{downsample_eval, read_test_set, synthesize_dataset, MockReaderTrainer, ReaderGrid};
use qagkit::types::read_contexts;
use qagkit::{MockBackend, QagDriver, Split, Strategy, StrategyConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let contexts = read_contexts(fixture("contexts.jsonl"))?;
    let test = read_test_set(fixture("test.jsonl"))?;
    let mut ae = MockBackend::from_file(fixture("mock_ae.json"))?;
    let mut qg = MockBackend::from_file(fixture("mock_qg.json"))?;
    let mut driver = QagDriver::Pipeline { ae: &mut ae, qg: &mut qg };
    let cfg = StrategyConfig::new(Strategy::Pipeline);
    let train = synthesize_dataset(&contexts[..40], &mut driver, &cfg, Split::Train)?.dataset;
    let validation = synthesize_dataset(&contexts[40..], &mut driver, &cfg, Split::Validation)?.dataset;

    let trials = 10;
    let seeds: Vec<u64> = (0..trials as u64).collect();
    let result = downsample_eval(
        &train,
        &validation,
        &test,
        (60, 10),
        trials,
        &seeds,
        &mut MockReaderTrainer::new(),
        &ReaderGrid::default(),
    )?;
    for t in &result.per_trial {
        println!("trial {} seed {}: {} ({} train pairs)", t.trial, t.seed, t.score, t.train_pairs);
    }
    println!(
        "F1 {:.3} [{:.3}, {:.3}]  EM {:.3} [{:.3}, {:.3}]",
        result.mean_f1, result.ci95_f1.0, result.ci95_f1.1, result.mean_em, result.ci95_em.0, result.ci95_em.1
    );
    Ok(())
}
