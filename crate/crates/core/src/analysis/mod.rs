//! Command implementations behind the `geope` binary.
//!
//! Exit codes: 0 success, 1 a property failed, 2 configuration error,
//! 3 I/O error.

pub mod attn;
pub mod bench;
pub mod config;
pub mod decay;
pub mod records;
pub mod table;
pub mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::json;
use thiserror::Error;

use crate::error::GeopeError;

pub use config::{Cli, CliOptions, Command, Format, RunConfig};
pub use records::{Table, Value};
pub use verify::{PropertyResult, VerifyReport};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Failed(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Failed(_) => 1,
            AppError::Config(_) => 2,
            AppError::Io { .. } => 3,
        }
    }
}

impl From<GeopeError> for AppError {
    fn from(e: GeopeError) -> Self {
        AppError::Config(e.to_string())
    }
}

fn command_meta(config: &RunConfig) -> serde_json::Value {
    json!({
        "schema_version": attn::SCHEMA_VERSION,
        "command": config.command.as_str(),
        "config": config,
    })
}

/// Runs the property suite and writes the report. A failing property yields
/// [`AppError::Failed`] after the report has been written.
pub fn cmd_verify(config: &RunConfig) -> Result<VerifyReport, AppError> {
    let report = verify::run_suite(config)?;
    let body = records::render(&report.to_table(), &command_meta(config), config.format);
    records::write_output(config.out.as_deref(), &body)?;
    Ok(report)
}

pub fn cmd_decay(config: &RunConfig) -> Result<Table, AppError> {
    let rows = decay::decay_curve(&config.schedule, config.dmax, config.draws, config.seed)?;
    let t = decay::decay_table(&rows);
    let mut meta = command_meta(config);
    meta["distance"] = json!("effective distance D = |Δp|/2; keys share their query's unit features");
    records::write_output(config.out.as_deref(), &records::render(&t, &meta, config.format))?;
    Ok(t)
}

pub fn cmd_table(config: &RunConfig) -> Result<Table, AppError> {
    let t = table::grid_table(&config.grid, &config.schedule, config.table_mode()?)?;
    records::write_output(config.out.as_deref(), &records::render(&t, &command_meta(config), config.format))?;
    Ok(t)
}

pub fn cmd_attn(config: &RunConfig) -> Result<crate::attention::AttentionTrace, AppError> {
    let dir = config
        .out
        .as_deref()
        .ok_or_else(|| AppError::Config("attn needs --out DIR".into()))?;
    let trace = crate::attention::run(&attn::attention_config(config))?;
    attn::write_outputs(dir, config, &trace)?;
    Ok(trace)
}

pub fn cmd_bench(config: &RunConfig) -> Result<Table, AppError> {
    let t = bench::bench_table(&bench::bench(config)?);
    records::write_output(config.out.as_deref(), &records::render(&t, &command_meta(config), config.format))?;
    Ok(t)
}

pub fn run(cli: &Cli) -> Result<(), AppError> {
    let config = RunConfig::resolve(cli.command, &cli.options)?;
    match config.command {
        Command::Verify => {
            let report = cmd_verify(&config)?;
            if !report.passed() {
                let names: Vec<_> = report.failures().iter().map(|p| p.name).collect();
                return Err(AppError::Failed(format!("failed properties: {}", names.join(", "))));
            }
        }
        Command::Decay => {
            cmd_decay(&config)?;
        }
        Command::Table => {
            cmd_table(&config)?;
        }
        Command::Attn => {
            cmd_attn(&config)?;
        }
        Command::Bench => {
            cmd_bench(&config)?;
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and maps errors to exit
/// codes.
pub fn main_entry() -> ExitCode {
    use clap::Parser;
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geope: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
