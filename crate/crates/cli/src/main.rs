//! `stickyflow` command-line entry point: read a JSON config, run the chosen
//! solver, and write deterministic CSV/SVG/JSON artifacts plus a manifest.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 IO error.

mod commands;
mod config;
mod output;

use clap::Parser;
use std::path::PathBuf;
use std::time::Instant;

use config::ConfigError;
use output::OutputWriter;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

/// Lagrangian solvers for one-dimensional pressureless self-interacting
/// fluids.
#[derive(Parser, Debug)]
#[command(name = "stickyflow", version)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory for artifacts (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Overrides the seed recorded in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Suppress the summary line on stdout.
    #[arg(long)]
    quiet: bool,
}

fn worker_cap() -> usize {
    std::env::var("STICKYFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&cli.config)?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.echo["seed"] = serde_json::json!(seed);
    }
    let mut out = OutputWriter::new(cli.out.clone())?;
    let metrics = commands::dispatch(&cfg, &mut out, worker_cap())?;
    let files = out.file_names();
    out.write_manifest(&cfg.echo, start.elapsed().as_secs_f64(), metrics)?;
    if !cli.quiet {
        println!(
            "{}: wrote {} + manifest.json in {:?}",
            cfg.command.name(),
            files.join(", "),
            start.elapsed()
        );
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
