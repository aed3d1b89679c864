//! Command-line orchestration: presets and JSON configurations in,
//! deterministic CSV/JSON artifacts and a run manifest out.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use sha2::{Digest, Sha256};

use config::{preset, Command, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// invalid configuration or arguments (exit code 2)
    Config(String),
    /// numerical or runtime failure (exit code 3)
    Numerical(String),
}

impl CliError {
    fn config<E: fmt::Display>(e: E) -> Self {
        CliError::Config(e.to_string())
    }

    fn numerical<E: fmt::Display>(e: E) -> Self {
        CliError::Numerical(e.to_string())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Low-lying Schwinger-model spectra via the concurrent VQE.
#[derive(Parser, Debug)]
#[command(name = "schwinger", version, about)]
struct Cli {
    /// subcommand: ed, cvqe, dispersion, massshift, zne or decompose
    #[arg(value_enum)]
    command: Command,

    /// path to a JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,

    /// named preset (table2, fig5, fig6-desk, fig10-desk, zne-demo)
    #[arg(long)]
    preset: Option<String>,

    /// master random seed (overrides the configuration)
    #[arg(long)]
    seed: Option<u64>,

    /// worker thread cap
    #[arg(long)]
    threads: Option<usize>,

    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_config(cli: &Cli) -> Result<(RunConfig, String), CliError> {
    let (mut cfg, source) = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
            (cfg, text)
        }
        (None, Some(name)) => {
            let cfg = preset(name)?;
            let text = serde_json::to_string(&cfg).map_err(CliError::config)?;
            (cfg, text)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Config("pass either --config or --preset, not both".into()))
        }
        (None, None) => {
            return Err(CliError::Config(format!(
                "one of --config or --preset is required; presets: {}",
                config::PRESETS.join(", ")
            )))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.random_seed = seed;
    }
    cfg.lattice.to_params()?;
    Ok((cfg, source))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let (cfg, source_text) = load_config(cli)?;
    let started = Instant::now();
    let outcome = commands::run(cli.command, &cfg, &cli.out)?;

    let mut hasher = Sha256::new();
    hasher.update(source_text.as_bytes());
    hasher.update([cli.command as u8]);
    hasher.update(cfg.random_seed.to_le_bytes());
    let manifest = serde_json::json!({
        "command": format!("{:?}", cli.command).to_lowercase(),
        "config_sha256": format!("{:x}", hasher.finalize()),
        "random_seed": cfg.random_seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "artifacts": outcome.artifacts,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(CliError::config)?;
    std::fs::write(cli.out.join("manifest.json"), text + "\n")
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    for artifact in &outcome.artifacts {
        println!("wrote {}", cli.out.join(artifact).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = serde_json::json!({
                "error": err.message(),
                "kind": err.kind(),
            });
            eprintln!("{report}");
            ExitCode::from(err.exit_code())
        }
    }
}
