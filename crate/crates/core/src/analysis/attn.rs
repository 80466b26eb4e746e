//! `geope attn` output: trace, per-head metrics and a metadata file.

use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};

use crate::attention::{AttentionConfig, AttentionTrace};

use super::records::{render, Table};
use super::{AppError, Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const NORMALIZATION: &str =
    "per head: sum over keys of weight times Euclidean patch distance, averaged over queries; overall: mean over heads";

pub fn attention_config(config: &RunConfig) -> AttentionConfig {
    AttentionConfig {
        heads: config.heads,
        grid: config.grid,
        pe_mode: config.mode(),
        schedule: config.schedule,
        seed: config.seed,
        precision: config.precision,
        offset: config.offset,
    }
}

pub fn trace_table(trace: &AttentionTrace) -> Table {
    let mut t = Table::new(&["head", "query_index", "key_index", "weight"]);
    let (heads, queries, keys) = trace.weights.dim();
    for h in 0..heads {
        for i in 0..queries {
            for j in 0..keys {
                t.push(vec![h.into(), i.into(), j.into(), trace.weights[[h, i, j]].into()]);
            }
        }
    }
    t
}

pub fn metrics_table(trace: &AttentionTrace) -> Table {
    let mut t = Table::new(&["head", "mean_attention_distance"]);
    for (h, d) in trace.distance.per_head.iter().enumerate() {
        t.push(vec![h.into(), (*d).into()]);
    }
    t
}

pub fn meta(config: &RunConfig, trace: &AttentionTrace) -> Json {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "attn",
        "config": config,
        "positions": "zero-based row-major grid coordinates; distances in patch units",
        "score_scale": "1/sqrt(head_dim)",
        "normalization": NORMALIZATION,
        "mean_attention_distance": trace.distance.mean,
    })
}

/// Writes `trace.*`, `metrics.*` and `meta.json` into `dir`, creating it if
/// needed. Returns the written paths.
pub fn write_outputs(dir: &Path, config: &RunConfig, trace: &AttentionTrace) -> Result<Vec<PathBuf>, AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let meta = meta(config, trace);
    let ext = match config.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let files = [
        (dir.join(format!("trace.{ext}")), render(&trace_table(trace), &meta, config.format)),
        (dir.join(format!("metrics.{ext}")), render(&metrics_table(trace), &meta, config.format)),
        (dir.join("meta.json"), serde_json::to_string_pretty(&meta).expect("serializable") + "\n"),
    ];
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| AppError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
