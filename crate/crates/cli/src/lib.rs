//! The `qag` command line: train, generate, evaluate, profile, serve, and
//! rerun any earlier command from its manifest.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage errors.

mod config;
mod evaluate;
mod generate;
mod profile;
mod serve;
mod train;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qagkit::RunManifest;
use serde::Serialize;

pub use config::merge_config;
pub use evaluate::EvaluateArgs;
pub use generate::GenerateArgs;
pub use profile::ProfileArgs;
pub use serve::ServeArgs;
pub use train::TrainArgs;

#[derive(Debug, Parser)]
#[command(name = "qag", version, about = "Question and answer generation toolkit")]
pub struct Cli {
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fine-tune a model for one QAG approach.
    Train(TrainArgs),
    /// Generate question-answer pairs for a file of contexts.
    Generate(GenerateArgs),
    /// Train readers on generated data and score them per domain.
    Evaluate(EvaluateArgs),
    /// Compare backend calls, memory and yield across strategies.
    Profile(ProfileArgs),
    /// Run the playground HTTP service.
    Serve(ServeArgs),
    /// Repeat a run from its manifest.json.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

/// Bad or missing arguments, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage<T>(message: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(message.into()).into())
}

/// Starts a manifest for `command`, recording the working directory so a
/// rerun resolves relative paths the same way.
pub(crate) fn start_manifest(command: &str, argv: &[String], seed: u64, args: &impl Serialize) -> RunManifest {
    let mut m = RunManifest::start(command, argv.to_vec(), seed);
    if let Ok(cwd) = std::env::current_dir() {
        m.config("cwd", cwd);
    }
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            m.config(&k, v);
        }
    }
    m
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .try_init();
}

/// Runs a parsed command. `argv` is the merged argument list recorded in manifests.
pub fn run(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train::run(a, argv),
        Command::Generate(a) => generate::run(a, argv),
        Command::Evaluate(a) => evaluate::run(a, argv),
        Command::Profile(a) => profile::run(a, argv),
        Command::Serve(a) => serve::run(a, argv),
        Command::Rerun(a) => rerun(&a.manifest),
    }
}

fn rerun(path: &Path) -> anyhow::Result<()> {
    let manifest = RunManifest::load(path)?;
    if manifest.args.first().map(String::as_str) == Some("rerun") {
        return usage("a rerun manifest cannot be rerun");
    }
    if let Some(cwd) = manifest.resolved_config.get("cwd").and_then(|v| v.as_str()) {
        std::env::set_current_dir(cwd).map_err(|e| anyhow::anyhow!("cannot enter {cwd}: {e}"))?;
    }
    log::info!("rerunning {} from {}", manifest.command, path.display());
    let full = std::iter::once("qag".to_string()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(full).map_err(|e| UsageError(format!("manifest arguments no longer parse: {e}")))?;
    run(cli, &manifest.args)
}

fn report(err: &anyhow::Error) -> ExitCode {
    if let Some(u) = err.downcast_ref::<UsageError>() {
        eprintln!("error: {u}\n\nFor more information, try '--help'.");
        return ExitCode::from(2);
    }
    if let Some(qagkit::Error::DomainMismatch(names)) = err.downcast_ref::<qagkit::Error>() {
        eprintln!("error: domain names differ between train, validation and test: {}", names.join(", "));
        return ExitCode::from(1);
    }
    eprintln!("error: {err:#}");
    ExitCode::from(1)
}

/// Entry point for the `qag` binary.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> ExitCode {
    let mut args: Vec<String> = args.into_iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let program = if args.is_empty() { "qag".to_string() } else { args.remove(0) };
    let argv = match merge_config(args) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(std::iter::once(program).chain(argv.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(&cli);
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
