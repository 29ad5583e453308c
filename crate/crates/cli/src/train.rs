use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::Args;
use qagkit::finetune::{
    build_corpus_for, default_hyperparams, finetune, shuffle_corpus, Corpus, HyperParams, Task, TrainExample,
};
use qagkit::types::read_quadruples;
use qagkit::{load_backend, Approach, EncodingConfig, FinetuneConfig};
use serde::Serialize;

use crate::{start_manifest, usage};

/// Stand-in knobs for mock and local test models, which have no registry entry.
const MOCK_HYPERPARAMS: HyperParams = HyperParams {
    epochs: 1,
    learning_rate: 1e-4,
    label_smoothing: 0.0,
    batch_size: 8,
};

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Backend spec: `mock:[fixture.json]`, `hf:<name-or-dir>`, or a registry name.
    #[arg(long)]
    pub model: String,

    /// pipeline-ae, pipeline-qg, multitask or end2end.
    #[arg(long, value_parser = parse_approach)]
    pub approach: Approach,

    /// Training quadruples (JSONL).
    #[arg(long)]
    pub data: PathBuf,

    /// Validation quadruples (JSONL).
    #[arg(long)]
    pub validation: Option<PathBuf>,

    /// Directory for the trained model, logs and manifest.
    #[arg(long, default_value = "runs/train")]
    pub output: PathBuf,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long)]
    pub label_smoothing: Option<f64>,

    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Encoding settings (TOML); defaults otherwise.
    #[arg(long)]
    pub encoding: Option<PathBuf>,
}

fn parse_approach(s: &str) -> Result<Approach, String> {
    s.parse().map_err(|_| {
        let all: Vec<_> = Approach::ALL.iter().map(|a| a.as_str()).collect();
        format!("expected one of {}", all.join(", "))
    })
}

fn resolve_config(args: &TrainArgs) -> anyhow::Result<FinetuneConfig> {
    let base = match default_hyperparams(&args.model, args.approach) {
        Some(h) => Some(h),
        None if args.model.starts_with("mock:") => {
            log::info!("{} has no registry entry; using placeholder hyperparameters", args.model);
            Some(MOCK_HYPERPARAMS)
        }
        None => None,
    };
    let h = match (base, args.epochs, args.learning_rate, args.label_smoothing, args.batch_size) {
        (Some(h), ..) => h,
        (None, Some(epochs), Some(learning_rate), Some(label_smoothing), Some(batch_size)) => HyperParams {
            epochs,
            learning_rate,
            label_smoothing,
            batch_size,
        },
        (None, ..) => {
            return usage(format!(
                "no default hyperparameters for ({}, {}); pass --epochs, --learning-rate, --label-smoothing and --batch-size",
                args.model, args.approach
            ))
        }
    };
    let mut cfg = FinetuneConfig::from_hyperparams(h, args.seed);
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.label_smoothing {
        cfg.label_smoothing = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}

fn load_corpus(path: &Path, approach: Approach, enc: &EncodingConfig) -> anyhow::Result<(Corpus, usize)> {
    let quads = read_quadruples(path).with_context(|| format!("reading {}", path.display()))?;
    let corpus = build_corpus_for(approach, &quads, enc);
    Ok((corpus, quads.len()))
}

fn write_jsonl(path: &Path, examples: &[TrainExample]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: TrainArgs, argv: &[String]) -> anyhow::Result<()> {
    let cfg = resolve_config(&args)?;
    let enc = match &args.encoding {
        Some(p) => EncodingConfig::load(p)?,
        None => EncodingConfig::default(),
    };
    let (mut corpus, n_quads) = load_corpus(&args.data, args.approach, &enc)?;
    log::info!(
        "{} corpus: {} examples from {n_quads} quadruples (ae {}, qg {}, end2end {}; {} truncated, {} dropped)",
        args.approach,
        corpus.len(),
        corpus.count(Task::Ae),
        corpus.count(Task::Qg),
        corpus.count(Task::End2end),
        corpus.truncated,
        corpus.dropped
    );
    shuffle_corpus(&mut corpus.examples, args.seed);
    let validation = match &args.validation {
        Some(p) => load_corpus(p, args.approach, &enc)?.0.examples,
        None => Vec::new(),
    };

    let mut handle = load_backend(&args.model)?;
    let log = finetune(handle.as_mut(), &corpus.examples, &validation, &cfg)?;

    let out = &args.output;
    fs::create_dir_all(out)?;
    let model_dir = out.join("model");
    handle.save(&model_dir)?;
    let corpus_path = out.join("corpus.jsonl");
    write_jsonl(&corpus_path, &corpus.examples)?;
    let log_path = out.join("training_log.json");
    fs::write(&log_path, serde_json::to_string_pretty(&log)?)?;
    let cfg_path = out.join("finetune.toml");
    fs::write(&cfg_path, cfg.to_toml_string())?;

    let mut m = start_manifest("train", argv, args.seed, &args);
    m.config("finetune", &cfg)
        .config("encoding", &enc)
        .config("corpus_size", corpus.len())
        .input(&args.data)
        .backend(handle.identity())
        .output(&model_dir)
        .output(&corpus_path)
        .output(&log_path)
        .output(&cfg_path);
    if let Some(v) = &args.validation {
        m.input(v);
    }
    let path = m.finish(out)?;
    println!("trained {} ({} examples); manifest {}", args.approach, corpus.len(), path.display());
    Ok(())
}
