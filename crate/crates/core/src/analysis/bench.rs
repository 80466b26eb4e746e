//! Wall-clock timings of encode + score per positional-encoding mode.

use std::time::Instant;

use serde::Serialize;

use crate::attention::{self, PeMode};
use crate::error::Result;
use crate::relative::DisplacementTable;

use super::attn::attention_config;
use super::records::Table;
use super::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: PeMode,
    pub reps: usize,
    pub min_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
    pub cache_entries: usize,
    pub cache_bytes: usize,
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn bench(config: &RunConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &mode in &config.modes {
        let mut cfg = attention_config(config);
        cfg.pe_mode = mode;
        cfg.validate()?;
        let (q, k) = attention::synthetic_qk(&cfg);
        let once = || -> Result<()> {
            let (qe, ke) = attention::encode_qk(&q, &k, &cfg)?;
            attention::attention_scores(&qe, &ke, &cfg)?;
            Ok(())
        };
        for _ in 0..config.warmup {
            once()?;
        }
        let mut times = Vec::with_capacity(config.reps);
        for _ in 0..config.reps {
            let start = Instant::now();
            once()?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(f64::total_cmp);
        let (cache_entries, cache_bytes) = if mode == PeMode::Lingeope2d {
            let table = DisplacementTable::for_grid(&cfg.grid, &cfg.schedule)?;
            (table.len(), table.memory_bytes())
        } else {
            (0, 0)
        };
        rows.push(BenchRow {
            mode,
            reps: config.reps,
            min_ms: times[0],
            median_ms: median(&times),
            max_ms: times[times.len() - 1],
            cache_entries,
            cache_bytes,
        });
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(&["mode", "reps", "min_ms", "median_ms", "max_ms", "cache_entries", "cache_bytes"]);
    for r in rows {
        t.push(vec![
            r.mode.as_str().into(),
            r.reps.into(),
            r.min_ms.into(),
            r.median_ms.into(),
            r.max_ms.into(),
            r.cache_entries.into(),
            r.cache_bytes.into(),
        ]);
    }
    t
}
