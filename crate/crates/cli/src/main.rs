//! `thermoform`: command-line front end.
//!
//! Precedence for every setting is flag, then config file, then the command default.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Command;
use config::{ConfigError, Format, JobConfig};

#[derive(Debug, Parser)]
#[command(
    name = "thermoform",
    version,
    about = "Thermodynamic formalism for expanding maps and subshifts"
)]
struct Cli {
    /// JSON job file (`thermoform-config/1`) or a bare model object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cylinder depth of the discretization.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] thermoform::Error),
    #[error("{0}")]
    Usage(String),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "schema",
            AppError::Core(e) if e.is_numerical() => "numerical",
            AppError::Core(_) => "validation",
            AppError::Usage(_) => "usage",
            AppError::Json(_) => "serialization",
            AppError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let v = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{v}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut cfg = match &cli.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    if cli.depth.is_some() {
        cfg.depth = cli.depth;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cli.command.resolve(&mut cfg);
    cfg.validate()?;
    let report = cli.command.run(&cfg)?;
    let text = output::render(cli.command.name(), &cfg, &report)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            return report_error("usage", msg.trim(), 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e.kind(), &e.to_string(), e.exit_code()),
    }
}
