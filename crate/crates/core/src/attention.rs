//! Multi-head attention over synthetic token grids with pluggable positional
//! encodings. No value projection: the score matrices and the attention
//! distance metric are the output.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{Array3, ArrayView3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeopeError, Result};
use crate::operator::{
    phases, rope_reference_1d, GeoPEOperator, GridPosition, GridShape, Mode, OperatorGrid, PhaseSchedule, Phases,
};
use crate::relative::DisplacementTable;
use crate::rng;

/// Positional encoding applied to queries and keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeMode {
    None,
    /// Standard RoPE on the flattened token index.
    Rope1d,
    /// One-axis GeoPE on the flattened token index.
    Geope1d,
    Geope2d,
    Geope3d,
    /// Linear GeoPE: rotation applied at score time from cached displacements.
    Lingeope2d,
}

impl PeMode {
    pub const ALL: [PeMode; 6] =
        [PeMode::None, PeMode::Rope1d, PeMode::Geope1d, PeMode::Geope2d, PeMode::Geope3d, PeMode::Lingeope2d];

    pub fn as_str(self) -> &'static str {
        match self {
            PeMode::None => "none",
            PeMode::Rope1d => "rope1d",
            PeMode::Geope1d => "geope1d",
            PeMode::Geope2d => "geope2d",
            PeMode::Geope3d => "geope3d",
            PeMode::Lingeope2d => "lingeope2d",
        }
    }

    /// Operator layout the mode needs, if any.
    pub fn operator_mode(self) -> Option<Mode> {
        match self {
            PeMode::None => None,
            PeMode::Rope1d | PeMode::Geope1d => Some(Mode::OneD),
            PeMode::Geope2d | PeMode::Lingeope2d => Some(Mode::TwoD),
            PeMode::Geope3d => Some(Mode::ThreeD),
        }
    }
}

impl fmt::Display for PeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PeMode {
    type Err = GeopeError;
    fn from_str(s: &str) -> Result<Self> {
        PeMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| GeopeError::InvalidConfig(format!("unknown pe mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    /// Rotation, scores and softmax in single precision.
    F32Apply,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttentionConfig {
    pub heads: usize,
    pub grid: GridShape,
    pub pe_mode: PeMode,
    /// Carries the head dimension.
    pub schedule: PhaseSchedule,
    pub seed: u64,
    pub precision: Precision,
    /// Added to every grid position before encoding.
    pub offset: GridPosition,
}

impl AttentionConfig {
    pub fn new(grid: GridShape, heads: usize, head_dim: usize, pe_mode: PeMode) -> Self {
        Self {
            heads,
            grid,
            pe_mode,
            schedule: PhaseSchedule::new(head_dim),
            seed: 0,
            precision: Precision::F64,
            offset: GridPosition::ORIGIN,
        }
    }

    #[inline]
    pub fn head_dim(&self) -> usize {
        self.schedule.head_dim
    }

    pub fn tokens(&self) -> usize {
        self.grid.token_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(GeopeError::InvalidConfig("heads must be ≥ 1".into()));
        }
        if self.head_dim() == 0 {
            return Err(GeopeError::InvalidConfig("head dim must be ≥ 1".into()));
        }
        if self.grid.height == 0 || self.grid.width == 0 || self.grid.depth == Some(0) {
            return Err(GeopeError::InvalidConfig(format!("grid {} has a zero extent", self.grid)));
        }
        let deep = self.grid.depth.is_some_and(|d| d > 1);
        if deep && matches!(self.pe_mode, PeMode::Geope2d | PeMode::Lingeope2d) {
            return Err(GeopeError::InvalidConfig(format!(
                "{} needs a 2D grid, got {}",
                self.pe_mode, self.grid
            )));
        }
        if let Some(mode) = self.pe_mode.operator_mode() {
            self.schedule.validate(mode)?;
        }
        Ok(())
    }

    /// Grid positions after applying the offset, in token order.
    pub fn positions(&self) -> Vec<GridPosition> {
        let mut pos = self.grid.positions();
        for p in &mut pos {
            *p = p.translated(&self.offset);
            if self.pe_mode == PeMode::Geope3d && p.p_d.is_none() {
                p.p_d = Some(self.offset.p_d.unwrap_or(0));
            }
        }
        pos
    }

    /// Flattened sequence index of a (shifted) grid position.
    fn sequence_index(&self, p: &GridPosition) -> i64 {
        let (h, w) = (self.grid.height as i64, self.grid.width as i64);
        (p.p_d.unwrap_or(0) * h + p.p_h) * w + p.p_w
    }
}

/// Per-head and overall mean attention distance, in patch units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionDistance {
    pub per_head: Vec<f64>,
    pub mean: f64,
}

/// Output of one attention pass. Arrays are `tokens × heads × dim` for the
/// encoded inputs and `heads × queries × keys` for scores.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub queries: Array3<f64>,
    pub keys: Array3<f64>,
    /// Scaled pre-softmax scores.
    pub logits: Array3<f64>,
    /// Row-softmax of `logits`.
    pub weights: Array3<f64>,
    pub distance: AttentionDistance,
}

fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("GEOPE_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build thread pool")
    })
}

/// Seeded standard-normal queries and keys, `tokens × heads × head_dim`.
pub fn synthetic_qk(config: &AttentionConfig) -> (Array3<f64>, Array3<f64>) {
    let shape = (config.tokens(), config.heads, config.head_dim());
    let len = shape.0 * shape.1 * shape.2;
    let q = rng::gaussian_vec(&mut rng::stream(config.seed, 0), len);
    let k = rng::gaussian_vec(&mut rng::stream(config.seed, 1), len);
    (
        Array3::from_shape_vec(shape, q).expect("shape matches length"),
        Array3::from_shape_vec(shape, k).expect("shape matches length"),
    )
}

fn check_shape(x: &Array3<f64>, config: &AttentionConfig, what: &str) -> Result<()> {
    let want = [config.tokens(), config.heads, config.head_dim()];
    if x.shape() != want {
        return Err(GeopeError::DimensionMismatch(format!(
            "{what} has shape {:?}, expected {:?}",
            x.shape(),
            want
        )));
    }
    Ok(())
}

enum Encoder {
    Identity,
    Rope { schedule: PhaseSchedule, seq: Vec<i64> },
    Operators(OperatorGrid),
}

impl Encoder {
    fn new(config: &AttentionConfig) -> Result<Self> {
        let positions = config.positions();
        Ok(match config.pe_mode {
            PeMode::None | PeMode::Lingeope2d => Encoder::Identity,
            PeMode::Rope1d => Encoder::Rope {
                schedule: config.schedule,
                seq: positions.iter().map(|p| config.sequence_index(p)).collect(),
            },
            PeMode::Geope1d => {
                let seq = positions.iter().map(|p| GridPosition::sequence(config.sequence_index(p))).collect();
                Encoder::Operators(OperatorGrid::build(seq, config.grid, &config.schedule, Mode::OneD)?)
            }
            PeMode::Geope2d => Encoder::Operators(OperatorGrid::build(positions, config.grid, &config.schedule, Mode::TwoD)?),
            PeMode::Geope3d => Encoder::Operators(OperatorGrid::build(positions, config.grid, &config.schedule, Mode::ThreeD)?),
        })
    }

    fn encode(&self, x: &Array3<f64>, precision: Precision) -> Result<Array3<f64>> {
        let mut out = x.clone();
        let (tokens, heads, _) = x.dim();
        for t in 0..tokens {
            for h in 0..heads {
                let src = x.slice(ndarray::s![t, h, ..]);
                let src = src.as_slice().expect("standard layout");
                let mut dst = out.slice_mut(ndarray::s![t, h, ..]);
                let dst = dst.as_slice_mut().expect("standard layout");
                match self {
                    Encoder::Identity => {}
                    Encoder::Rope { schedule, seq } => rope_encode(schedule, seq[t], src, dst, precision),
                    Encoder::Operators(grid) => apply_op(grid.get(t), src, dst, precision)?,
                }
            }
        }
        Ok(out)
    }
}

fn apply_op(op: &GeoPEOperator, src: &[f64], dst: &mut [f64], precision: Precision) -> Result<()> {
    match precision {
        Precision::F64 => op.apply_into(src, dst),
        Precision::F32Apply => {
            let x: Vec<f32> = src.iter().map(|v| *v as f32).collect();
            let mut y = vec![0.0f32; x.len()];
            op.apply_f32_into(&x, &mut y)?;
            dst.iter_mut().zip(&y).for_each(|(d, v)| *d = *v as f64);
            Ok(())
        }
    }
}

fn rope_encode(schedule: &PhaseSchedule, p: i64, src: &[f64], dst: &mut [f64], precision: Precision) {
    for (k, (s, d)) in src.chunks_exact(2).zip(dst.chunks_exact_mut(2)).enumerate() {
        let theta = p as f64 * schedule.frequency(schedule.schedule_index(k));
        match precision {
            Precision::F64 => {
                let (a, b) = rope_reference_1d((s[0], s[1]), theta);
                d[0] = a;
                d[1] = b;
            }
            Precision::F32Apply => {
                let (sn, cs) = (theta.sin() as f32, theta.cos() as f32);
                let (x0, x1) = (s[0] as f32, s[1] as f32);
                d[0] = (cs * x0 - sn * x1) as f64;
                d[1] = (sn * x0 + cs * x1) as f64;
            }
        }
    }
}

/// Applies the configured positional encoding to every head of `q` and `k`.
/// `none` and `lingeope2d` return the inputs unchanged.
pub fn encode_qk(q: &Array3<f64>, k: &Array3<f64>, config: &AttentionConfig) -> Result<(Array3<f64>, Array3<f64>)> {
    config.validate()?;
    check_shape(q, config, "queries")?;
    check_shape(k, config, "keys")?;
    let encoder = Encoder::new(config)?;
    Ok((encoder.encode(q, config.precision)?, encoder.encode(k, config.precision)?))
}

/// Scaled dot-product scores and row softmax, plus the attention distance.
///
/// Rows are computed independently (in parallel) with a fixed summation
/// order, so results do not depend on the thread count.
pub fn attention_scores(q: &Array3<f64>, k: &Array3<f64>, config: &AttentionConfig) -> Result<AttentionTrace> {
    config.validate()?;
    check_shape(q, config, "queries")?;
    check_shape(k, config, "keys")?;
    let tokens = config.tokens();
    let heads = config.heads;
    let positions = config.positions();
    let table = match config.pe_mode {
        PeMode::Lingeope2d => Some(DisplacementTable::for_grid(&config.grid, &config.schedule)?),
        _ => None,
    };
    let scale = 1.0 / (config.head_dim() as f64).sqrt();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = thread_pool().install(|| {
        (0..heads * tokens)
            .into_par_iter()
            .map(|row| {
                let (h, i) = (row / tokens, row % tokens);
                score_row(q, k, h, i, &positions, table.as_ref(), scale, config.precision)
            })
            .collect()
    });

    let mut logits = Array3::<f64>::zeros((heads, tokens, tokens));
    let mut weights = Array3::<f64>::zeros((heads, tokens, tokens));
    for (row, (l, w)) in rows.into_iter().enumerate() {
        let (h, i) = (row / tokens, row % tokens);
        for j in 0..tokens {
            logits[[h, i, j]] = l[j];
            weights[[h, i, j]] = w[j];
        }
    }
    let base_positions = config.grid.positions();
    let distance = mean_attention_distance(weights.view(), &base_positions);
    Ok(AttentionTrace { queries: q.clone(), keys: k.clone(), logits, weights, distance })
}

#[allow(clippy::too_many_arguments)]
fn score_row(
    q: &Array3<f64>,
    k: &Array3<f64>,
    h: usize,
    i: usize,
    positions: &[GridPosition],
    table: Option<&DisplacementTable>,
    scale: f64,
    precision: Precision,
) -> (Vec<f64>, Vec<f64>) {
    let tokens = positions.len();
    let qi = q.slice(ndarray::s![i, h, ..]);
    let qi = qi.as_slice().expect("standard layout");
    match precision {
        Precision::F64 => {
            let logits: Vec<f64> = (0..tokens)
                .map(|j| {
                    let kj = k.slice(ndarray::s![j, h, ..]);
                    let kj = kj.as_slice().expect("standard layout");
                    let raw = match table {
                        Some(t) => t
                            .lookup(&positions[i], &positions[j])
                            .expect("displacement inside grid")
                            .score(qi, kj),
                        None => qi.iter().zip(kj).map(|(a, b)| a * b).sum(),
                    };
                    raw * scale
                })
                .collect();
            let weights = softmax(&logits);
            (logits, weights)
        }
        Precision::F32Apply => {
            let q32: Vec<f32> = qi.iter().map(|v| *v as f32).collect();
            let scale32 = scale as f32;
            let logits: Vec<f32> = (0..tokens)
                .map(|j| {
                    let kj = k.slice(ndarray::s![j, h, ..]);
                    let k32: Vec<f32> = kj.iter().map(|v| *v as f32).collect();
                    let raw = match table {
                        Some(t) => t
                            .lookup(&positions[i], &positions[j])
                            .expect("displacement inside grid")
                            .score_f32(&q32, &k32),
                        None => q32.iter().zip(&k32).map(|(a, b)| a * b).sum(),
                    };
                    raw * scale32
                })
                .collect();
            let weights = softmax_f32(&logits);
            (
                logits.iter().map(|v| *v as f64).collect(),
                weights.iter().map(|v| *v as f64).collect(),
            )
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn softmax_f32(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// For each head, `Σ_keys weight · ‖pos_q − pos_k‖` averaged over queries;
/// `mean` then averages the heads.
pub fn mean_attention_distance(weights: ArrayView3<'_, f64>, positions: &[GridPosition]) -> AttentionDistance {
    let (heads, queries, keys) = weights.dim();
    let per_head: Vec<f64> = (0..heads)
        .map(|h| {
            let mut acc = 0.0;
            for i in 0..queries {
                let mut row = 0.0;
                for j in 0..keys {
                    let w = weights[[h, i, j]];
                    if w != 0.0 {
                        row += w * positions[i].distance(&positions[j]);
                    }
                }
                acc += row;
            }
            if queries == 0 {
                0.0
            } else {
                acc / queries as f64
            }
        })
        .collect();
    let mean = if heads == 0 { 0.0 } else { per_head.iter().sum::<f64>() / heads as f64 };
    AttentionDistance { per_head, mean }
}

/// Synthetic inputs, encoding and scoring in one call.
pub fn run(config: &AttentionConfig) -> Result<AttentionTrace> {
    config.validate()?;
    let (q, k) = synthetic_qk(config);
    let (qe, ke) = encode_qk(&q, &k, config)?;
    attention_scores(&qe, &ke, config)
}

/// Phases of one grid position for every block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionPhases {
    pub position: GridPosition,
    pub phases: Vec<Phases>,
}

/// Phases for every position of an `H × W` grid under a fixed schedule.
/// Larger grids than the one a model was trained on simply continue the
/// linear phase law; nothing is interpolated.
pub fn resolution_phase_grid(height: usize, width: usize, schedule: &PhaseSchedule) -> Result<Vec<PositionPhases>> {
    if height == 0 || width == 0 {
        return Err(GeopeError::InvalidConfig("grid extents must be ≥ 1".into()));
    }
    let n = schedule.block_count(Mode::TwoD)?;
    GridShape::new(height, width)
        .positions()
        .into_iter()
        .map(|position| {
            let phases = (0..n)
                .map(|b| phases(&position, schedule.schedule_index(b), schedule, Mode::TwoD))
                .collect::<Result<Vec<_>>>()?;
            Ok(PositionPhases { position, phases })
        })
        .collect()
}
