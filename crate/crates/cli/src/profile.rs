use std::fs;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::Args;
use qagkit::eval::{format_multiple, profile_resources, run_profiled, ResourceProfile, StrategyRun};
use qagkit::types::read_quadruples;
use qagkit::{QAGDataset, Split, Strategy};
use serde::Serialize;
use serde_json::json;

use crate::generate::{driver, load_models, strategy_config};
use crate::{start_manifest, usage};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    /// Contexts (dataset JSONL); any pairs they carry count as gold.
    #[arg(long)]
    pub contexts: PathBuf,

    /// Gold quadruples (JSONL); overrides the pairs in --contexts.
    #[arg(long)]
    pub gold: Option<PathBuf>,

    /// End2end model spec.
    #[arg(long)]
    pub end2end: Option<String>,

    /// Multitask model spec.
    #[arg(long)]
    pub multitask: Option<String>,

    /// Pipeline model specs: answer extraction, then question generation.
    #[arg(long, num_args = 2, value_names = ["AE", "QG"])]
    pub pipeline: Option<Vec<String>>,

    /// Directory for profile.json and the manifest.
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = qagkit::backend::DEFAULT_NUM_BEAMS)]
    pub num_beams: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Fixed-width table; ratio columns compare against end2end when it was profiled.
pub fn render_table(profiles: &[ResourceProfile]) -> String {
    let baseline = profiles.iter().find(|p| p.strategy == Strategy::End2end);
    let mut out = format!(
        "{:<10} {:>15} {:>6} {:>10} {:>6} {:>6} {:>6}\n",
        "strategy", "calls/paragraph", "models", "pairs/gold", "cost", "memory", "pairs"
    );
    for p in profiles {
        let (cost, memory, pairs) = match baseline {
            Some(b) => {
                let r = p.relative_to(b);
                (format_multiple(r.cost), format_multiple(r.memory), format_multiple(r.pairs))
            }
            None => ("-".into(), "-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{:<10} {:>15.2} {:>6} {:>10.2} {:>6} {:>6} {:>6}\n",
            p.strategy.as_str(),
            p.backend_calls_per_paragraph,
            p.model_count,
            p.pairs_per_gold_pair,
            cost,
            memory,
            pairs
        ));
    }
    out
}

pub fn run(args: ProfileArgs, argv: &[String]) -> anyhow::Result<()> {
    let mut plan: Vec<(Strategy, Vec<String>)> = Vec::new();
    if let Some(m) = &args.end2end {
        plan.push((Strategy::End2end, vec![m.clone()]));
    }
    if let Some(m) = &args.multitask {
        plan.push((Strategy::Multitask, vec![m.clone()]));
    }
    if let Some(ms) = &args.pipeline {
        plan.push((Strategy::Pipeline, ms.clone()));
    }
    if plan.is_empty() {
        return usage("give at least one of --end2end, --multitask, --pipeline");
    }

    let dataset = QAGDataset::read_jsonl_file(&args.contexts, Split::Test)
        .with_context(|| format!("reading {}", args.contexts.display()))?;
    let gold_pairs = match &args.gold {
        Some(p) => read_quadruples(p).with_context(|| format!("reading {}", p.display()))?.len(),
        None => dataset.pair_count(),
    };
    let contexts: Vec<_> = dataset.into_entries().into_iter().map(|e| e.context).collect();

    let mut m = start_manifest("profile", argv, args.seed, &args);
    let mut runs: Vec<StrategyRun> = Vec::new();
    for (strategy, specs) in &plan {
        let cfg = strategy_config(*strategy, args.num_beams, 1, false, None)?;
        let mut handles = load_models(*strategy, specs)?;
        for h in &handles {
            m.backend(h.identity());
        }
        let (_, run) = run_profiled(&contexts, gold_pairs, &mut driver(*strategy, &mut handles), &cfg)?;
        log::info!("{strategy}: {} calls over {} paragraphs", run.backend_calls, run.paragraphs);
        runs.push(run);
    }
    let profiles = profile_resources(&runs);
    print!("{}", render_table(&profiles));

    let relative: serde_json::Map<String, serde_json::Value> = match profiles.iter().find(|p| p.strategy == Strategy::End2end) {
        Some(b) => profiles
            .iter()
            .map(|p| {
                let r = p.relative_to(b);
                (
                    p.strategy.as_str().to_string(),
                    json!({
                        "cost": format_multiple(r.cost),
                        "memory": format_multiple(r.memory),
                        "pairs": format_multiple(r.pairs),
                    }),
                )
            })
            .collect(),
        None => serde_json::Map::new(),
    };
    fs::create_dir_all(&args.output)?;
    let path = args.output.join("profile.json");
    let doc = json!({ "runs": runs, "profiles": profiles, "relative_to_end2end": relative });
    fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    m.input(&args.contexts).output(&path);
    if let Some(g) = &args.gold {
        m.input(g);
    }
    m.finish(&args.output)?;
    Ok(())
}
