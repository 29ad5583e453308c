use std::path::PathBuf;

use anyhow::Context as _;
use clap::Args;
use qag_playground::{AppState, ModelPool, ServiceConfig};
use serde::Serialize;

use crate::start_manifest;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    /// `name=spec`, repeatable; a bare spec is also its name.
    #[arg(long = "model")]
    pub models: Vec<String>,

    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,

    /// Longest context accepted, in characters.
    #[arg(long, default_value_t = 10_000)]
    pub char_limit: usize,

    /// Longer contexts are answered with a job token.
    #[arg(long, default_value_t = 2_048)]
    pub sync_char_limit: usize,

    /// Pending requests per model before 429.
    #[arg(long, default_value_t = 4)]
    pub queue_depth: usize,

    /// Allowed browser origin; any when omitted.
    #[arg(long)]
    pub cors_origin: Option<String>,

    /// Keep sessions as JSON files here.
    #[arg(long)]
    pub persist_dir: Option<PathBuf>,
}

pub fn run(args: ServeArgs, argv: &[String]) -> anyhow::Result<()> {
    let mut pool = ModelPool::new(args.queue_depth);
    for assignment in &args.models {
        pool.load_assignment(assignment)
            .with_context(|| format!("loading {assignment}"))?;
    }
    if pool.is_empty() {
        log::warn!("no model loaded; /generate will answer 503");
    }
    let config = ServiceConfig {
        char_limit: args.char_limit,
        sync_char_limit: args.sync_char_limit,
        queue_depth: args.queue_depth,
        cors_origin: args.cors_origin.clone(),
        persist_dir: args.persist_dir.clone(),
    };
    if let Some(dir) = &args.persist_dir {
        let mut m = start_manifest("serve", argv, 0, &args);
        for info in pool.info() {
            m.backend(format!("{}={}", info.name, info.spec));
        }
        m.output(dir);
        m.finish(dir)?;
    }
    let state = AppState::new(config, pool)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(qag_playground::serve(&args.addr, state))?;
    Ok(())
}
