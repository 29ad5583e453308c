use std::path::PathBuf;

use anyhow::Context as _;
use clap::Args;
use qagkit::eval::run_profiled;
use qagkit::types::read_contexts;
use qagkit::{load_backend, EncodingConfig, ModelHandle, QagDriver, Strategy, StrategyConfig};
use serde::Serialize;

use crate::{parent_dir, start_manifest, usage};

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// pipeline, multitask or end2end.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,

    /// Backend spec; pipeline takes two, answer extraction first.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,

    /// Contexts (dataset JSONL; `pairs` may be omitted).
    #[arg(long)]
    pub contexts: PathBuf,

    /// Output dataset (JSONL). The manifest goes into the same directory.
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = qagkit::backend::DEFAULT_NUM_BEAMS)]
    pub num_beams: usize,

    #[arg(long, default_value_t = 1)]
    pub answers_per_sentence: usize,

    /// Keep end2end pairs whose answer does not occur in the context.
    #[arg(long)]
    pub allow_outside_answers: bool,

    /// Encoding settings (TOML).
    #[arg(long)]
    pub encoding: Option<PathBuf>,
}

pub(crate) fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s.parse::<Strategy>() {
        Ok(Strategy::Gold) | Err(_) => Err("expected one of pipeline, multitask, end2end".into()),
        Ok(st) => Ok(st),
    }
}

pub(crate) fn strategy_config(
    strategy: Strategy,
    num_beams: usize,
    answers_per_sentence: usize,
    allow_outside: bool,
    encoding: Option<&PathBuf>,
) -> anyhow::Result<StrategyConfig> {
    let mut cfg = StrategyConfig::new(strategy);
    cfg.num_beams = num_beams;
    cfg.answers_per_sentence = answers_per_sentence;
    cfg.require_answer_in_context = !allow_outside;
    if let Some(p) = encoding {
        cfg.encoding = EncodingConfig::load(p)?;
    }
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}

/// Loads the handles a strategy needs, checking the count first.
pub(crate) fn load_models(strategy: Strategy, specs: &[String]) -> anyhow::Result<Vec<ModelHandle>> {
    let wanted = if strategy == Strategy::Pipeline { 2 } else { 1 };
    if specs.len() != wanted {
        let hint = if strategy == Strategy::Pipeline {
            " (answer extraction, then question generation)"
        } else {
            ""
        };
        return usage(format!(
            "--strategy {strategy} takes {wanted} --model value(s){hint}, got {}",
            specs.len()
        ));
    }
    specs
        .iter()
        .map(|s| load_backend(s).with_context(|| format!("loading {s}")))
        .collect()
}

pub(crate) fn driver(strategy: Strategy, handles: &mut [ModelHandle]) -> QagDriver<'_> {
    match (strategy, handles) {
        (Strategy::Pipeline, [ae, qg]) => QagDriver::Pipeline {
            ae: ae.as_mut(),
            qg: qg.as_mut(),
        },
        (Strategy::Multitask, [m]) => QagDriver::Multitask(m.as_mut()),
        (_, [m, ..]) => QagDriver::End2end(m.as_mut()),
        _ => unreachable!("handle count is checked by load_models"),
    }
}

pub fn run(args: GenerateArgs, argv: &[String]) -> anyhow::Result<()> {
    let cfg = strategy_config(
        args.strategy,
        args.num_beams,
        args.answers_per_sentence,
        args.allow_outside_answers,
        args.encoding.as_ref(),
    )?;
    let mut handles = load_models(args.strategy, &args.models)?;
    let identities: Vec<String> = handles.iter().map(|h| h.identity()).collect();
    let contexts = read_contexts(&args.contexts).with_context(|| format!("reading {}", args.contexts.display()))?;

    let (synthesis, run) = run_profiled(&contexts, 0, &mut driver(args.strategy, &mut handles), &cfg)?;
    let per_context = if contexts.is_empty() {
        0.0
    } else {
        run.backend_calls as f64 / contexts.len() as f64
    };
    log::info!(
        "{}: {} contexts, {} backend calls ({per_context:.2} per context), {} pairs, {} malformed segments, {} filtered",
        args.strategy,
        contexts.len(),
        run.backend_calls,
        synthesis.dataset.pair_count(),
        synthesis.dropped_segments,
        synthesis.filtered
    );
    let out_dir = parent_dir(&args.output);
    std::fs::create_dir_all(&out_dir)?;
    synthesis.dataset.write_jsonl_file(&args.output)?;

    let mut m = start_manifest("generate", argv, args.seed, &args);
    m.config("strategy_config", &cfg)
        .config("backend_calls", run.backend_calls)
        .config("pairs", synthesis.dataset.pair_count())
        .config("dropped_segments", synthesis.dropped_segments)
        .config("filtered", synthesis.filtered)
        .input(&args.contexts)
        .output(&args.output);
    for id in identities {
        m.backend(id);
    }
    m.finish(&out_dir)?;
    println!(
        "{} pairs from {} contexts written to {}",
        synthesis.dataset.pair_count(),
        contexts.len(),
        args.output.display()
    );
    Ok(())
}
