use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::Args;
use qagkit::eval::{
    downsample_eval, extrinsic_eval, load_reader_trainer, read_test_set, split_by_domain, write_downsample_csv,
    DownsampleResult, DownsampleRow, ReaderGrid,
};
use qagkit::{QAGDataset, Split};
use serde::Serialize;

use crate::{start_manifest, usage};

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Generated training pairs (dataset JSONL).
    #[arg(long)]
    pub train: PathBuf,

    /// Generated validation pairs (dataset JSONL).
    #[arg(long)]
    pub validation: PathBuf,

    /// Human-written test questions (JSONL with id, context, question, answers, domain).
    #[arg(long)]
    pub test: PathBuf,

    /// `mock`, `hf:<name>`, or a reader checkpoint name.
    #[arg(long, default_value = "mock")]
    pub reader: String,

    /// Directory for report.json, report.md and the manifest.
    #[arg(long)]
    pub output: PathBuf,

    /// Row label in the Markdown table; the train file stem by default.
    #[arg(long)]
    pub label: Option<String>,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Reader learning rates searched on validation F1.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-5, 5e-5, 1e-4])]
    pub learning_rates: Vec<f64>,

    /// Reader epoch counts searched on validation F1.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
    pub epochs: Vec<usize>,

    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Also run size-matched trials and write downsample.csv.
    #[arg(long)]
    pub downsample: bool,

    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Gold training set whose per-domain pair counts are the downsampling targets.
    #[arg(long)]
    pub gold_train: Option<PathBuf>,

    /// Gold validation set whose per-domain pair counts are the downsampling targets.
    #[arg(long)]
    pub gold_validation: Option<PathBuf>,

    /// Fixed training target for every domain, instead of --gold-train.
    #[arg(long, conflicts_with = "gold_train")]
    pub target_train: Option<usize>,

    /// Fixed validation target for every domain, instead of --gold-validation.
    #[arg(long, conflicts_with = "gold_validation")]
    pub target_validation: Option<usize>,
}

fn read_dataset(path: &Path, split: Split) -> anyhow::Result<QAGDataset> {
    QAGDataset::read_jsonl_file(path, split).with_context(|| format!("reading {}", path.display()))
}

/// Per-domain targets from a gold file or one fixed number.
fn targets(gold: Option<&PathBuf>, fixed: Option<usize>, flag: &str) -> anyhow::Result<Target> {
    match (gold, fixed) {
        (_, Some(n)) => Ok(Target::Fixed(n)),
        (Some(p), None) => Ok(Target::PerDomain(read_dataset(p, Split::Train)?.pair_counts_by_domain())),
        (None, None) => usage(format!("--downsample needs --gold-{flag} or --target-{flag}")),
    }
}

enum Target {
    Fixed(usize),
    PerDomain(BTreeMap<String, usize>),
}

impl Target {
    fn get(&self, domain: &str) -> anyhow::Result<usize> {
        match self {
            Target::Fixed(n) => Ok(*n),
            Target::PerDomain(m) => m
                .get(domain)
                .copied()
                .ok_or_else(|| anyhow::anyhow!("gold data has no domain {domain:?}")),
        }
    }
}

pub fn run(args: EvaluateArgs, argv: &[String]) -> anyhow::Result<()> {
    if args.downsample && args.trials < 2 {
        return usage("--trials must be at least 2");
    }
    if args.learning_rates.is_empty() || args.epochs.is_empty() {
        return usage("the reader grid needs at least one learning rate and one epoch count");
    }
    let grid = ReaderGrid {
        learning_rates: args.learning_rates.clone(),
        epochs: args.epochs.clone(),
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let label = args.label.clone().unwrap_or_else(|| {
        args.train
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "generated".into())
    });
    let targets = if args.downsample {
        Some((
            targets(args.gold_train.as_ref(), args.target_train, "train")?,
            targets(args.gold_validation.as_ref(), args.target_validation, "validation")?,
        ))
    } else {
        None
    };

    let train = read_dataset(&args.train, Split::Train)?;
    let validation = read_dataset(&args.validation, Split::Validation)?;
    let test = read_test_set(&args.test).with_context(|| format!("reading {}", args.test.display()))?;
    let domains = split_by_domain(&train, &validation, &test)?;
    let mut trainer = load_reader_trainer(&args.reader)?;

    let report = extrinsic_eval(&domains, trainer.as_mut(), &grid)?;
    let out = &args.output;
    fs::create_dir_all(out)?;
    let json_path = out.join("report.json");
    fs::write(&json_path, report.to_json())?;
    let markdown = report.to_markdown(&label);
    let md_path = out.join("report.md");
    fs::write(&md_path, &markdown)?;
    print!("{markdown}");

    let mut m = start_manifest("evaluate", argv, args.seed, &args);
    m.input(&args.train)
        .input(&args.validation)
        .input(&args.test)
        .backend(trainer.identity())
        .output(&json_path)
        .output(&md_path);

    if let Some((t_train, t_val)) = targets {
        let seeds: Vec<u64> = (0..args.trials as u64).map(|i| args.seed + i).collect();
        let mut results: BTreeMap<String, DownsampleResult> = BTreeMap::new();
        for (domain, splits) in &domains {
            let target = (t_train.get(domain)?, t_val.get(domain)?);
            let result = downsample_eval(
                &splits.train,
                &splits.validation,
                &splits.test,
                target,
                args.trials,
                &seeds,
                trainer.as_mut(),
                &grid,
            )?;
            println!(
                "{domain}: F1 {:.1} [{:.1}, {:.1}], EM {:.1} [{:.1}, {:.1}] over {} trials at {}/{} pairs{}",
                100.0 * result.mean_f1,
                100.0 * result.ci95_f1.0,
                100.0 * result.ci95_f1.1,
                100.0 * result.mean_em,
                100.0 * result.ci95_em.0,
                100.0 * result.ci95_em.1,
                result.trials,
                target.0,
                target.1,
                if result.undersized { " (undersized)" } else { "" }
            );
            results.insert(domain.clone(), result);
        }
        let rows = downsample_rows(&results, args.trials);
        let csv_path = out.join("downsample.csv");
        write_downsample_csv(fs::File::create(&csv_path)?, &rows)?;
        let ds_json = out.join("downsample.json");
        fs::write(&ds_json, serde_json::to_string_pretty(&results)?)?;
        m.config("seeds", &seeds).output(&csv_path).output(&ds_json);
        if let Some(p) = &args.gold_train {
            m.input(p);
        }
        if let Some(p) = &args.gold_validation {
            m.input(p);
        }
    }
    m.config("report", &report);
    m.finish(out)?;
    Ok(())
}

/// One row per (trial, domain) plus a per-trial `average` row, in percent.
fn downsample_rows(results: &BTreeMap<String, DownsampleResult>, trials: usize) -> Vec<DownsampleRow> {
    let mut rows = Vec::new();
    for trial in 0..trials {
        let mut f1 = Vec::new();
        let mut em = Vec::new();
        for (domain, r) in results {
            let s = r.per_trial[trial].score;
            f1.push(s.f1);
            em.push(s.exact_match);
            rows.push(DownsampleRow {
                trial,
                domain: domain.clone(),
                f1: 100.0 * s.f1,
                em: 100.0 * s.exact_match,
            });
        }
        let n = f1.len().max(1) as f64;
        rows.push(DownsampleRow {
            trial,
            domain: "average".into(),
            f1: 100.0 * f1.iter().sum::<f64>() / n,
            em: 100.0 * em.iter().sum::<f64>() / n,
        });
    }
    rows
}
