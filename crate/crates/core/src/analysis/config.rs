//! Run configuration: command-line flags layered over an optional
//! `key=value` file. Every value goes through the same parser, so a bad value
//! is reported identically whichever source it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::AppError;
use crate::attention::{PeMode, Precision};
use crate::operator::{ExponentSign, GridPosition, GridShape, IndexConvention, Mode, PhaseSchedule, Remainder};

#[derive(Debug, Parser)]
#[command(name = "geope", version, about = "Quaternion rotary positional embeddings: checks, tables and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: CliOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Run every property check and write a pass/fail report
    Verify,
    /// Tabulate per-position, per-block rotors
    Table,
    /// Mean |score| against effective distance
    Decay,
    /// Attention traces and mean attention distance
    Attn,
    /// Encode + score timings per mode
    Bench,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Table => "table",
            Command::Decay => "decay",
            Command::Attn => "attn",
            Command::Bench => "bench",
        }
    }
}

/// Raw flag values. Everything is a string here and parsed in
/// [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, Args)]
pub struct CliOptions {
    /// Head dimension
    #[arg(long, global = true, value_name = "N")]
    pub dim: Option<String>,
    /// Frequency base λ
    #[arg(long, global = true, value_name = "λ")]
    pub base: Option<String>,
    /// HxW or DxHxW
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// none, rope1d, geope1d, geope2d, geope3d or lingeope2d (comma list for bench)
    #[arg(long, global = true, value_name = "M")]
    pub mode: Option<String>,
    /// zero or one
    #[arg(long, global = true)]
    pub index_convention: Option<String>,
    /// pos or neg
    #[arg(long, global = true)]
    pub exp_sign: Option<String>,
    /// strict or passthrough
    #[arg(long, global = true)]
    pub remainder: Option<String>,
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<String>,
    #[arg(long, global = true, value_name = "K")]
    pub draws: Option<String>,
    #[arg(long, global = true, value_name = "D")]
    pub dmax: Option<String>,
    #[arg(long, global = true)]
    pub heads: Option<String>,
    /// dh,dw or dd,dh,dw added to every grid position
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub offset: Option<String>,
    /// f64 or f32
    #[arg(long, global = true)]
    pub precision: Option<String>,
    /// Timed repetitions (bench)
    #[arg(long, global = true)]
    pub reps: Option<String>,
    /// Untimed warmup runs (bench)
    #[arg(long, global = true)]
    pub warmup: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// csv or json
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// key=value file; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a config file, spelled as the long flag.
pub const KEYS: &[&str] = &[
    "dim",
    "base",
    "grid",
    "mode",
    "index-convention",
    "exp-sign",
    "remainder",
    "seed",
    "draws",
    "dmax",
    "heads",
    "offset",
    "precision",
    "reps",
    "warmup",
    "out",
    "format",
];

impl CliOptions {
    fn to_map(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("dim", &self.dim),
            ("base", &self.base),
            ("grid", &self.grid),
            ("mode", &self.mode),
            ("index-convention", &self.index_convention),
            ("exp-sign", &self.exp_sign),
            ("remainder", &self.remainder),
            ("seed", &self.seed),
            ("draws", &self.draws),
            ("dmax", &self.dmax),
            ("heads", &self.heads),
            ("offset", &self.offset),
            ("precision", &self.precision),
            ("reps", &self.reps),
            ("warmup", &self.warmup),
            ("out", &self.out),
            ("format", &self.format),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub schedule: PhaseSchedule,
    pub grid: GridShape,
    pub modes: Vec<PeMode>,
    pub seed: u64,
    pub draws: usize,
    pub dmax: usize,
    pub heads: usize,
    pub offset: GridPosition,
    pub precision: Precision,
    pub reps: usize,
    pub warmup: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let modes = match command {
            Command::Bench => PeMode::ALL.to_vec(),
            _ => vec![PeMode::Geope2d],
        };
        Self {
            command,
            schedule: PhaseSchedule::new(48),
            grid: GridShape::new(14, 14),
            modes,
            seed: 0,
            draws: 200,
            dmax: 32,
            heads: 12,
            offset: GridPosition::ORIGIN,
            precision: Precision::F64,
            reps: 20,
            warmup: 5,
            out: None,
            format: Format::Csv,
        }
    }

    /// Merges file values under flag values and validates the result.
    pub fn resolve(command: Command, options: &CliOptions) -> Result<Self, AppError> {
        let mut values = match &options.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        values.extend(options.to_map());
        Self::from_pairs(command, &values)
    }

    pub fn from_pairs(command: Command, values: &BTreeMap<String, String>) -> Result<Self, AppError> {
        let mut c = Self::defaults(command);
        for (key, raw) in values {
            let v = raw.trim();
            match key.as_str() {
                "dim" => c.schedule.head_dim = parse(key, v)?,
                "base" => c.schedule.base_lambda = parse(key, v)?,
                "grid" => c.grid = parse(key, v)?,
                "mode" => c.modes = parse_modes(v)?,
                "index-convention" => c.schedule.index_convention = parse::<IndexConvention>(key, v)?,
                "exp-sign" => c.schedule.exponent_sign = parse::<ExponentSign>(key, v)?,
                "remainder" => {
                    c.schedule.remainder = match v {
                        "strict" => Remainder::Strict,
                        "passthrough" => Remainder::Passthrough,
                        _ => return Err(bad(key, v)),
                    }
                }
                "seed" => c.seed = parse(key, v)?,
                "draws" => c.draws = parse(key, v)?,
                "dmax" => c.dmax = parse(key, v)?,
                "heads" => c.heads = parse(key, v)?,
                "offset" => c.offset = parse_offset(v)?,
                "precision" => {
                    c.precision = match v {
                        "f64" => Precision::F64,
                        "f32" => Precision::F32Apply,
                        _ => return Err(bad(key, v)),
                    }
                }
                "reps" => c.reps = parse(key, v)?,
                "warmup" => c.warmup = parse(key, v)?,
                "out" => c.out = Some(PathBuf::from(v)),
                "format" => {
                    c.format = match v {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        _ => return Err(bad(key, v)),
                    }
                }
                _ => return Err(AppError::Config(format!("unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// The single mode of every command except `bench`.
    pub fn mode(&self) -> PeMode {
        self.modes[0]
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let s = &self.schedule;
        if s.head_dim == 0 {
            return Err(AppError::Config("dim must be ≥ 1".into()));
        }
        if !(s.base_lambda.is_finite() && s.base_lambda > 1.0) {
            return Err(AppError::Config(format!("base must be a finite value > 1, got {}", s.base_lambda)));
        }
        if self.draws == 0 {
            return Err(AppError::Config("draws must be ≥ 1".into()));
        }
        if self.heads == 0 {
            return Err(AppError::Config("heads must be ≥ 1".into()));
        }
        if self.reps == 0 {
            return Err(AppError::Config("reps must be ≥ 1".into()));
        }
        if self.modes.is_empty() {
            return Err(AppError::Config("no mode given".into()));
        }
        if self.command != Command::Bench && self.modes.len() > 1 {
            return Err(AppError::Config(format!("{} takes a single mode", self.command.as_str())));
        }
        if self.offset.p_d.is_some() && self.grid.depth.is_none() {
            return Err(AppError::Config("3-component offset needs a DxHxW grid".into()));
        }
        match self.command {
            Command::Decay => s.validate(Mode::TwoD)?,
            Command::Table => {
                s.validate(self.table_mode()?)?;
            }
            _ => {
                for m in &self.modes {
                    if let Some(op) = m.operator_mode() {
                        s.validate(op)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Operator layout tabulated by `table`.
    pub fn table_mode(&self) -> Result<Mode, AppError> {
        match self.mode() {
            PeMode::Geope1d => Ok(Mode::OneD),
            PeMode::Geope2d | PeMode::Lingeope2d => Ok(Mode::TwoD),
            PeMode::Geope3d => Ok(Mode::ThreeD),
            m => Err(AppError::Config(format!("table has no rotors for mode {m}"))),
        }
    }
}

fn bad(key: &str, value: &str) -> AppError {
    AppError::Config(format!("invalid value `{value}` for {key}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, AppError> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_modes(v: &str) -> Result<Vec<PeMode>, AppError> {
    v.split(',')
        .map(|m| m.trim().parse::<PeMode>().map_err(|_| bad("mode", m)))
        .collect()
}

fn parse_offset(v: &str) -> Result<GridPosition, AppError> {
    let parts = v
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad("offset", v))?;
    match parts[..] {
        [h, w] => Ok(GridPosition::new(h, w)),
        [d, h, w] => Ok(GridPosition::new_3d(d, h, w)),
        _ => Err(bad("offset", v)),
    }
}

/// Reads `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, AppError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("config line {}: expected key=value", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(AppError::Config(format!("config line {}: unknown key `{}`", n + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::from_pairs(Command::Verify, &BTreeMap::new()).unwrap();
        assert_eq!(c.schedule.head_dim, 48);
        assert_eq!(c.schedule.base_lambda, 100.0);
        assert_eq!(c.grid, GridShape::new(14, 14));
        assert_eq!(c.modes, vec![PeMode::Geope2d]);
        assert_eq!(RunConfig::defaults(Command::Bench).modes.len(), 6);
    }

    #[test]
    fn indivisible_dim_is_config_error() {
        let e = RunConfig::from_pairs(Command::Verify, &pairs(&[("dim", "64")])).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::from_pairs(Command::Verify, &pairs(&[("dim", "64"), ("mode", "geope1d")])).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        for (k, v) in [("base", "1"), ("grid", "0x4"), ("draws", "0"), ("mode", "x"), ("offset", "1"), ("seed", "-1")] {
            assert!(RunConfig::from_pairs(Command::Decay, &pairs(&[(k, v)])).is_err(), "{k}={v}");
        }
        assert!(RunConfig::from_pairs(Command::Attn, &pairs(&[("mode", "none,geope2d")])).is_err());
        assert!(RunConfig::from_pairs(Command::Table, &pairs(&[("mode", "rope1d")])).is_err());
    }

    #[test]
    fn config_file_parsing() {
        let text = "# comment\ndim = 12\nexp_sign=pos # trailing\n\noffset=-2,3\n";
        let map = parse_config_text(text).unwrap();
        let c = RunConfig::from_pairs(Command::Attn, &map).unwrap();
        assert_eq!(c.schedule.head_dim, 12);
        assert_eq!(c.schedule.exponent_sign, ExponentSign::Positive);
        assert_eq!(c.offset, GridPosition::new(-2, 3));
        assert!(parse_config_text("colour=red").is_err());
        assert!(parse_config_text("dim").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "dim=12\nseed=3\n").unwrap();
        let opts = CliOptions { seed: Some("9".into()), config: Some(path), ..Default::default() };
        let c = RunConfig::resolve(Command::Verify, &opts).unwrap();
        assert_eq!(c.schedule.head_dim, 12);
        assert_eq!(c.seed, 9);
    }
}
