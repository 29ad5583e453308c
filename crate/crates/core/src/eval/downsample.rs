//! Size-matched comparison: shrink generated datasets to a target pair count
//! over several seeded trials and report mean scores with a 95% interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reader::{evaluate, train_reader, ReaderGrid, ReaderTrainer, TestExample};
use crate::error::{Error, Result};
use crate::metrics::ScorePair;
use crate::types::QAGDataset;

/// Samples `target` pairs uniformly without replacement across the whole
/// dataset. Entry and pair order are preserved; entries left with no pairs
/// are removed. Returns the dataset unchanged when it has `target` pairs or fewer.
pub fn downsample_pairs(dataset: &QAGDataset, target: usize, rng: &mut ChaCha8Rng) -> QAGDataset {
    let total = dataset.pair_count();
    if total <= target {
        return dataset.clone();
    }
    let mut keep = vec![false; total];
    for i in rand::seq::index::sample(rng, total, target) {
        keep[i] = true;
    }
    let mut out = QAGDataset::new(dataset.split());
    let mut flat = 0;
    for entry in dataset.entries() {
        let mut pairs = Vec::new();
        for pair in &entry.pairs {
            if keep[flat] {
                pairs.push(pair.clone());
            }
            flat += 1;
        }
        if !pairs.is_empty() {
            out.push(entry.context.clone(), pairs);
        }
    }
    out
}

/// Mean and normal-approximation 95% interval, `mean ± 1.96·sd/√n` with the
/// sample standard deviation.
pub fn mean_ci95(values: &[f64]) -> Result<(f64, (f64, f64))> {
    if values.len() < 2 {
        return Err(Error::validation("a confidence interval needs at least 2 trials"));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], (values[0], values[0])));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * var.sqrt() / n.sqrt();
    Ok((mean, (mean - half, mean + half)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub trial: usize,
    pub seed: u64,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub score: ScorePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleResult {
    pub trials: usize,
    pub mean_f1: f64,
    pub mean_em: f64,
    pub ci95_f1: (f64, f64),
    pub ci95_em: (f64, f64),
    /// Set when a split had fewer pairs than its target and was used whole.
    pub undersized: bool,
    pub per_trial: Vec<TrialScore>,
}

impl DownsampleResult {
    pub fn from_trials(per_trial: Vec<TrialScore>, undersized: bool) -> Result<Self> {
        let f1: Vec<f64> = per_trial.iter().map(|t| t.score.f1).collect();
        let em: Vec<f64> = per_trial.iter().map(|t| t.score.exact_match).collect();
        let (mean_f1, ci95_f1) = mean_ci95(&f1)?;
        let (mean_em, ci95_em) = mean_ci95(&em)?;
        Ok(Self {
            trials: per_trial.len(),
            mean_f1,
            mean_em,
            ci95_f1,
            ci95_em,
            undersized,
            per_trial,
        })
    }
}

/// Per trial: downsample train and validation to `target` pair counts with the
/// trial's seed, retrain the reader, and score it on `test`.
#[allow(clippy::too_many_arguments)]
pub fn downsample_eval(
    train: &QAGDataset,
    validation: &QAGDataset,
    test: &[TestExample],
    target: (usize, usize),
    trials: usize,
    seeds: &[u64],
    trainer: &mut dyn ReaderTrainer,
    grid: &ReaderGrid,
) -> Result<DownsampleResult> {
    if trials < 2 {
        return Err(Error::validation(format!("trials must be at least 2, got {trials}")));
    }
    if seeds.len() != trials {
        return Err(Error::validation(format!(
            "{} seeds given for {trials} trials",
            seeds.len()
        )));
    }
    let undersized = train.pair_count() < target.0 || validation.pair_count() < target.1;
    if undersized {
        log::warn!(
            "dataset smaller than target ({}/{} pairs for {}/{}); using all pairs",
            train.pair_count(),
            validation.pair_count(),
            target.0,
            target.1
        );
    }
    let mut per_trial = Vec::with_capacity(trials);
    for (trial, &seed) in seeds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = downsample_pairs(train, target.0, &mut rng);
        let v = downsample_pairs(validation, target.1, &mut rng);
        let mut trained = train_reader(&t, &v, trainer, &grid.clone().with_seed(seed))?;
        let score = evaluate(trained.reader.as_mut(), test)?;
        log::info!("trial {trial} (seed {seed}): {score}");
        per_trial.push(TrialScore {
            trial,
            seed,
            train_pairs: t.pair_count(),
            validation_pairs: v.pair_count(),
            score,
        });
    }
    DownsampleResult::from_trials(per_trial, undersized)
}
