//! `steadywave <config.toml> [--stage <stage>]`
//!
//! Exit codes: 0 success, 2 validation, 3 convergence, 4 resolution, 1 other.

mod config;
mod output;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use steadywave::ErrorClass;
use thiserror::Error;

use config::{RunConfig, Stage};
use output::Outputs;

/// Environment variable that overrides `output_dir`.
const OUTPUT_DIR_ENV: &str = "STEADYWAVE_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error(transparent)]
    Solver(#[from] steadywave::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Solver(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Convergence => 3,
                ErrorClass::Resolution => 4,
                ErrorClass::Io => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "steadywave", version, about = "Steady water waves over periodic bottoms")]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// Run this stage instead of the one in the config.
    #[arg(long, value_enum)]
    stage: Option<Stage>,
}

fn load(args: &Args) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(&args.config)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(stage) = args.stage {
        config.stage = stage;
    }
    Ok((config, bytes))
}

fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let (config, bytes) = load(args)?;
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut out = Outputs::new(&output_dir(&config))?;
    let status = stages::run(&config, &base, &mut out);
    let header = json!({
        "stage": config.stage.name(),
        "seed": config.seed,
        "config_sha256": output::config_hash(&bytes),
        "config": config,
    });
    let dir = out.dir().to_path_buf();
    out.finish(header, status.as_ref().map(|_| ()))?;
    if status.is_ok() {
        eprintln!("wrote {}", dir.display());
    }
    status
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("steadywave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
