//! QA-based extrinsic evaluation: synthesize pseudo QA datasets with a QAG
//! model, fine-tune a reader on them, and score it on held-out questions.

mod downsample;
mod profile;
mod reader;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use log::info;

use crate::error::{Error, Result};
use crate::strategies::{QagDriver, StrategyConfig};
use crate::types::{Context, QAGDataset, Split, DEFAULT_DOMAIN};

pub use downsample::{downsample_eval, downsample_pairs, mean_ci95, DownsampleResult, TrialScore};
pub use profile::{
    format_multiple, profile_resources, run_profiled, RelativeProfile, ResourceProfile, StrategyRun,
};
pub use reader::{
    evaluate, load_reader_trainer, read_test_set, to_reader_examples, train_reader, HfReaderTrainer,
    MockReaderTrainer, Reader, ReaderExample, ReaderGrid, ReaderTrainer, TestExample, TrainedReader,
};
pub use report::{write_downsample_csv, DatasetSize, DownsampleRow, EvalReport};

/// A synthesized split plus what was lost along the way.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub dataset: QAGDataset,
    pub dropped_segments: usize,
    pub filtered: usize,
}

/// Runs the driver over every context and collects the pairs as one split.
pub fn synthesize_dataset(
    contexts: &[Context],
    driver: &mut QagDriver<'_>,
    cfg: &StrategyConfig,
    split: Split,
) -> Result<Synthesis> {
    let mut dataset = QAGDataset::new(split);
    let (mut dropped_segments, mut filtered) = (0, 0);
    for ctx in contexts {
        let generated = driver.generate(ctx, cfg)?;
        dropped_segments += generated.dropped_segments;
        filtered += generated.filtered;
        dataset.push(ctx.clone(), generated.pairs);
    }
    for (domain, n) in dataset.pair_counts_by_domain() {
        info!("{split:?} {domain}: {n} pairs from {} strategy", driver.strategy());
    }
    Ok(Synthesis {
        dataset,
        dropped_segments,
        filtered,
    })
}

/// Per-domain inputs to [`extrinsic_eval`].
#[derive(Debug, Clone)]
pub struct DomainSplits {
    pub train: QAGDataset,
    pub validation: QAGDataset,
    pub test: Vec<TestExample>,
}

fn domain_of(d: Option<&str>) -> String {
    d.unwrap_or(DEFAULT_DOMAIN).to_string()
}

/// Groups train, validation and test data by domain.
///
/// Train and test must cover the same domains, and validation may only use
/// domains present in train; otherwise the offending names are reported.
pub fn split_by_domain(
    train: &QAGDataset,
    validation: &QAGDataset,
    test: &[TestExample],
) -> Result<BTreeMap<String, DomainSplits>> {
    let train_by = train.by_domain();
    let val_by = validation.by_domain();
    let train_domains: BTreeSet<String> = train_by.keys().cloned().collect();
    let test_domains: BTreeSet<String> = test.iter().map(|t| domain_of(t.domain.as_deref())).collect();
    let mut bad: BTreeSet<String> = train_domains.symmetric_difference(&test_domains).cloned().collect();
    bad.extend(val_by.keys().filter(|d| !train_domains.contains(*d)).cloned());
    if !bad.is_empty() {
        return Err(Error::DomainMismatch(bad.into_iter().collect()));
    }
    let mut out = BTreeMap::new();
    for (domain, train_split) in train_by {
        let validation = val_by
            .get(&domain)
            .cloned()
            .unwrap_or_else(|| QAGDataset::new(Split::Validation));
        let test = test
            .iter()
            .filter(|t| domain_of(t.domain.as_deref()) == domain)
            .cloned()
            .collect();
        out.insert(
            domain,
            DomainSplits {
                train: train_split,
                validation,
                test,
            },
        );
    }
    Ok(out)
}

/// Trains and scores one reader per domain.
pub fn extrinsic_eval(
    domains: &BTreeMap<String, DomainSplits>,
    trainer: &mut dyn ReaderTrainer,
    grid: &ReaderGrid,
) -> Result<EvalReport> {
    let mut per_domain = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for (domain, splits) in domains {
        let mut trained = train_reader(&splits.train, &splits.validation, trainer, grid)?;
        let score = evaluate(trained.reader.as_mut(), &splits.test)?;
        info!("{domain}: {score} (reader lr={}, epochs={})", trained.config.learning_rate, trained.config.epochs);
        per_domain.insert(domain.clone(), score);
        sizes.insert(
            domain.clone(),
            DatasetSize {
                train: splits.train.pair_count(),
                validation: splits.validation.pair_count(),
            },
        );
    }
    EvalReport::new(per_domain, sizes)
}
