//! Phase schedules and GeoPE rotational operators.
//!
//! A `d`-dimensional feature is split into `d/3` triples (2D and 3D grids)
//! or `d/2` pairs (1D sequences). Every sub-vector gets its own rotor built
//! from the position phases at that sub-vector's frequency.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GeopeError, Result};
use crate::lie::SERIES_THRESHOLD;
use crate::quat::{sandwich_rotate, to_rotation_matrix, Mat3, Quaternion, UnitQuaternion, Vector3};

/// Default frequency base.
pub const DEFAULT_BASE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneD,
    TwoD,
    ThreeD,
}

impl Mode {
    /// Feature dimensions consumed by one block.
    pub fn stride(self) -> usize {
        match self {
            Mode::OneD => 2,
            Mode::TwoD | Mode::ThreeD => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OneD => "one_d",
            Mode::TwoD => "two_d",
            Mode::ThreeD => "three_d",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    /// `i ∈ {0, …, n−1}`
    #[default]
    ZeroBased,
    /// `i ∈ {1, …, n}`
    OneBased,
}

impl FromStr for IndexConvention {
    type Err = GeopeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "zero_based" | "0" => Ok(Self::ZeroBased),
            "one" | "one_based" | "1" => Ok(Self::OneBased),
            _ => Err(GeopeError::InvalidConfig(format!("unknown index convention `{s}`"))),
        }
    }
}

/// Sign `s` in the frequency `λ^{s·2i/d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentSign {
    Positive,
    /// Decaying frequencies, as in standard RoPE.
    #[default]
    Negative,
}

impl ExponentSign {
    pub fn value(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
        }
    }
}

impl FromStr for ExponentSign {
    type Err = GeopeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" | "+" => Ok(Self::Positive),
            "neg" | "negative" | "-" => Ok(Self::Negative),
            _ => Err(GeopeError::InvalidConfig(format!("unknown exponent sign `{s}`"))),
        }
    }
}

/// What to do with the trailing `d mod stride` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remainder {
    /// Reject head dims that are not a multiple of the block stride.
    #[default]
    Strict,
    /// Experimental: leave the trailing dimensions unrotated.
    Passthrough,
}

/// Frequency rule `θ = p · λ^{s·2i/d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub base_lambda: f64,
    pub head_dim: usize,
    pub index_convention: IndexConvention,
    pub exponent_sign: ExponentSign,
    pub remainder: Remainder,
}

impl PhaseSchedule {
    pub fn new(head_dim: usize) -> Self {
        Self {
            base_lambda: DEFAULT_BASE,
            head_dim,
            index_convention: IndexConvention::ZeroBased,
            exponent_sign: ExponentSign::Negative,
            remainder: Remainder::Strict,
        }
    }

    pub fn with_base(mut self, base: f64) -> Self {
        self.base_lambda = base;
        self
    }

    pub fn with_sign(mut self, sign: ExponentSign) -> Self {
        self.exponent_sign = sign;
        self
    }

    pub fn with_convention(mut self, convention: IndexConvention) -> Self {
        self.index_convention = convention;
        self
    }

    pub fn with_remainder(mut self, remainder: Remainder) -> Self {
        self.remainder = remainder;
        self
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if !self.base_lambda.is_finite() || self.base_lambda <= 1.0 {
            return Err(GeopeError::InvalidConfig(format!(
                "base must be a finite value > 1, got {}",
                self.base_lambda
            )));
        }
        let stride = mode.stride();
        if self.head_dim < stride {
            return Err(GeopeError::DimensionMismatch(format!(
                "head dim {} is smaller than one {} block ({stride})",
                self.head_dim, mode
            )));
        }
        if !self.head_dim.is_multiple_of(stride) && self.remainder == Remainder::Strict {
            return Err(GeopeError::DimensionMismatch(format!(
                "head dim {} is not divisible by {stride} ({} mode)",
                self.head_dim, mode
            )));
        }
        Ok(())
    }

    /// Number of rotated sub-vectors.
    pub fn block_count(&self, mode: Mode) -> Result<usize> {
        self.validate(mode)?;
        Ok(self.head_dim / mode.stride())
    }

    /// Schedule index `i` of the `block`-th sub-vector (zero-based position).
    #[inline]
    pub fn schedule_index(&self, block: usize) -> usize {
        match self.index_convention {
            IndexConvention::ZeroBased => block,
            IndexConvention::OneBased => block + 1,
        }
    }

    /// Inclusive range of admissible schedule indices.
    pub fn index_range(&self, mode: Mode) -> Result<(usize, usize)> {
        let n = self.block_count(mode)?;
        Ok((self.schedule_index(0), self.schedule_index(n - 1)))
    }

    /// `λ^{s·2i/d}` with no range check.
    #[inline]
    pub fn frequency(&self, i: usize) -> f64 {
        let exponent = self.exponent_sign.value() * (2 * i) as f64 / self.head_dim as f64;
        self.base_lambda.powf(exponent)
    }

    pub fn frequency_checked(&self, mode: Mode, i: usize) -> Result<f64> {
        let (lo, hi) = self.index_range(mode)?;
        if i < lo || i > hi {
            return Err(GeopeError::IndexOutOfRange { index: i, lo, hi });
        }
        Ok(self.frequency(i))
    }
}

/// Patch coordinates. Negative values are allowed for shifted grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GridPosition {
    pub p_d: Option<i64>,
    pub p_h: i64,
    pub p_w: i64,
}

impl GridPosition {
    pub const ORIGIN: GridPosition = GridPosition { p_d: None, p_h: 0, p_w: 0 };

    pub const fn new(p_h: i64, p_w: i64) -> Self {
        Self { p_d: None, p_h, p_w }
    }

    pub const fn new_3d(p_d: i64, p_h: i64, p_w: i64) -> Self {
        Self { p_d: Some(p_d), p_h, p_w }
    }

    /// A 1D sequence index. One-dimensional operators read `p_h`.
    pub const fn sequence(p: i64) -> Self {
        Self { p_d: None, p_h: p, p_w: 0 }
    }

    pub fn translated(&self, by: &GridPosition) -> Self {
        let p_d = match (self.p_d, by.p_d) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
        };
        Self { p_d, p_h: self.p_h + by.p_h, p_w: self.p_w + by.p_w }
    }

    /// Euclidean distance in patch units.
    pub fn distance(&self, other: &GridPosition) -> f64 {
        let dd = (self.p_d.unwrap_or(0) - other.p_d.unwrap_or(0)) as f64;
        let dh = (self.p_h - other.p_h) as f64;
        let dw = (self.p_w - other.p_w) as f64;
        (dd * dd + dh * dh + dw * dw).sqrt()
    }
}

/// Per-axis phases of one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Phases {
    pub theta_d: Option<f64>,
    pub theta_h: f64,
    pub theta_w: f64,
}

/// Phases of block `i` (given in the schedule's index convention).
pub fn phases(pos: &GridPosition, i: usize, schedule: &PhaseSchedule, mode: Mode) -> Result<Phases> {
    let f = schedule.frequency_checked(mode, i)?;
    Ok(Phases {
        theta_d: pos.p_d.map(|p| p as f64 * f),
        theta_h: pos.p_h as f64 * f,
        theta_w: pos.p_w as f64 * f,
    })
}

/// `cos(θ/2) + sin(θ/2) j`.
pub fn build_1d(theta: f64) -> UnitQuaternion {
    let (s, c) = (0.5 * theta).sin_cos();
    UnitQuaternion::new_unchecked(Quaternion::new(c, 0.0, s, 0.0))
}

/// Closed form of `exp(½(log r_h + log r_w))`:
/// `cos(Θ/2) + sin(Θ/2)(θ_h j + θ_w k)/(2Θ)` with `Θ = ½√(θ_h² + θ_w²)`.
pub fn build_2d(theta_h: f64, theta_w: f64) -> UnitQuaternion {
    let coupled = 0.5 * (theta_h * theta_h + theta_w * theta_w).sqrt();
    let half = 0.5 * coupled;
    // sin(Θ/2) / (2Θ)
    let ratio = if coupled < SERIES_THRESHOLD {
        0.25 * (1.0 - coupled * coupled / 24.0)
    } else {
        half.sin() / (2.0 * coupled)
    };
    UnitQuaternion::new_unchecked(Quaternion::new(
        half.cos(),
        0.0,
        theta_h * ratio,
        theta_w * ratio,
    ))
}

/// Closed form of `exp(⅓(log r_d + log r_h + log r_w))` with `Θ = ⅓√(θ_d² + θ_h² + θ_w²)`.
pub fn build_3d(theta_d: f64, theta_h: f64, theta_w: f64) -> UnitQuaternion {
    let coupled = (theta_d * theta_d + theta_h * theta_h + theta_w * theta_w).sqrt() / 3.0;
    let half = 0.5 * coupled;
    // sin(Θ/2) / (3Θ)
    let ratio = if coupled < SERIES_THRESHOLD {
        (1.0 - coupled * coupled / 24.0) / 6.0
    } else {
        half.sin() / (3.0 * coupled)
    };
    UnitQuaternion::new_unchecked(Quaternion::new(
        half.cos(),
        theta_d * ratio,
        theta_h * ratio,
        theta_w * ratio,
    ))
}

/// Explicit 3×3 block for phases `(θ_h, θ_w)`, evaluated entry by entry.
/// The `(0, 0)` limit is the identity.
pub fn rotation_block(theta_h: f64, theta_w: f64) -> Mat3 {
    let s2 = theta_h * theta_h + theta_w * theta_w;
    let s = s2.sqrt();
    let coupled = 0.5 * s;
    // a = sin(Θ)/s, b = (1 − cos Θ)/s²
    let (cos_c, a, b) = if coupled < SERIES_THRESHOLD {
        let c2 = coupled * coupled;
        (1.0 - 0.5 * c2, 0.5 * (1.0 - c2 / 6.0), 0.125 * (1.0 - c2 / 12.0))
    } else {
        let (sin_c, cos_c) = coupled.sin_cos();
        let h = (0.5 * coupled).sin();
        (cos_c, sin_c / s, 2.0 * h * h / s2)
    };
    Mat3::from_rows(
        [cos_c, -theta_w * a, theta_h * a],
        [theta_w * a, 1.0 - theta_w * theta_w * b, theta_h * theta_w * b],
        [-theta_h * a, theta_h * theta_w * b, 1.0 - theta_h * theta_h * b],
    )
}

/// Standard RoPE rotation `[[cos θ, −sin θ], [sin θ, cos θ]]` of a feature pair.
pub fn rope_reference_1d(pair: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * pair.0 - s * pair.1, s * pair.0 + c * pair.1)
}

/// Rotor of one sub-vector together with its matrix form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    /// Schedule index `i` of this block.
    pub index: usize,
    pub phases: Phases,
    pub quaternion: UnitQuaternion,
    pub matrix: Mat3,
}

/// Block-diagonal GeoPE operator for one position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoPEOperator {
    pub mode: Mode,
    pub head_dim: usize,
    pub blocks: Vec<Block>,
}

pub fn build_operator(pos: &GridPosition, schedule: &PhaseSchedule, mode: Mode) -> Result<GeoPEOperator> {
    let n = schedule.block_count(mode)?;
    let mut blocks = Vec::with_capacity(n);
    for k in 0..n {
        let index = schedule.schedule_index(k);
        let ph = phases(pos, index, schedule, mode)?;
        let quaternion = match mode {
            Mode::OneD => build_1d(ph.theta_h),
            Mode::TwoD => build_2d(ph.theta_h, ph.theta_w),
            Mode::ThreeD => build_3d(ph.theta_d.unwrap_or(0.0), ph.theta_h, ph.theta_w),
        };
        blocks.push(Block { index, phases: ph, quaternion, matrix: to_rotation_matrix(&quaternion) });
    }
    Ok(GeoPEOperator { mode, head_dim: schedule.head_dim, blocks })
}

impl GeoPEOperator {
    pub fn identity(mode: Mode, schedule: &PhaseSchedule) -> Result<Self> {
        build_operator(&GridPosition::ORIGIN, schedule, mode)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.head_dim {
            return Err(GeopeError::DimensionMismatch(format!(
                "feature length {len} does not match head dim {}",
                self.head_dim
            )));
        }
        Ok(())
    }

    /// Quaternion path: every sub-vector goes through `r p r*`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(out.len())?;
        let stride = self.mode.stride();
        for (k, block) in self.blocks.iter().enumerate() {
            let o = k * stride;
            if stride == 3 {
                let v = sandwich_rotate(&block.quaternion, &Vector3::from_slice(&x[o..o + 3]));
                out[o..o + 3].copy_from_slice(&v.to_array());
            } else {
                let v = sandwich_rotate(&block.quaternion, &Vector3::new(x[o], 0.0, x[o + 1]));
                out[o] = v.x;
                out[o + 1] = v.z;
            }
        }
        let tail = self.blocks.len() * stride;
        out[tail..].copy_from_slice(&x[tail..]);
        Ok(())
    }

    /// Matrix path using the cached 3×3 blocks.
    pub fn apply_matrix(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_matrix_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_matrix_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(out.len())?;
        let stride = self.mode.stride();
        for (k, block) in self.blocks.iter().enumerate() {
            let o = k * stride;
            let m = &block.matrix.0;
            if stride == 3 {
                let v = block.matrix.mul_vec(&Vector3::from_slice(&x[o..o + 3]));
                out[o..o + 3].copy_from_slice(&v.to_array());
            } else {
                let (a, b) = (x[o], x[o + 1]);
                out[o] = m[0] * a + m[2] * b;
                out[o + 1] = m[6] * a + m[8] * b;
            }
        }
        let tail = self.blocks.len() * stride;
        out[tail..].copy_from_slice(&x[tail..]);
        Ok(())
    }

    /// Single-precision matrix path.
    pub fn apply_f32_into(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(out.len())?;
        let stride = self.mode.stride();
        for (k, block) in self.blocks.iter().enumerate() {
            let o = k * stride;
            let m = block.matrix.to_f32();
            if stride == 3 {
                let (a, b, c) = (x[o], x[o + 1], x[o + 2]);
                out[o] = m[0] * a + m[1] * b + m[2] * c;
                out[o + 1] = m[3] * a + m[4] * b + m[5] * c;
                out[o + 2] = m[6] * a + m[7] * b + m[8] * c;
            } else {
                let (a, b) = (x[o], x[o + 1]);
                out[o] = m[0] * a + m[2] * b;
                out[o + 1] = m[6] * a + m[8] * b;
            }
        }
        let tail = self.blocks.len() * stride;
        out[tail..].copy_from_slice(&x[tail..]);
        Ok(())
    }
}

/// Free-function form of [`GeoPEOperator::apply`].
pub fn apply_operator(op: &GeoPEOperator, x: &[f64]) -> Result<Vec<f64>> {
    op.apply(x)
}

/// Grid extent; `depth` is `None` for 2D grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub depth: Option<usize>,
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { depth: None, height, width }
    }

    pub const fn new_3d(depth: usize, height: usize, width: usize) -> Self {
        Self { depth: Some(depth), height, width }
    }

    pub fn token_count(&self) -> usize {
        self.depth.unwrap_or(1) * self.height * self.width
    }

    /// Zero-based row-major positions: `token = (d·H + h)·W + w`.
    pub fn positions(&self) -> Vec<GridPosition> {
        let mut out = Vec::with_capacity(self.token_count());
        for d in 0..self.depth.unwrap_or(1) {
            for h in 0..self.height {
                for w in 0..self.width {
                    out.push(GridPosition {
                        p_d: self.depth.map(|_| d as i64),
                        p_h: h as i64,
                        p_w: w as i64,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.depth {
            Some(d) => write!(f, "{d}x{}x{}", self.height, self.width),
            None => write!(f, "{}x{}", self.height, self.width),
        }
    }
}

impl FromStr for GridShape {
    type Err = GeopeError;
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| GeopeError::InvalidConfig(format!("bad grid `{s}`")))?;
        let shape = match dims[..] {
            [h, w] => GridShape::new(h, w),
            [d, h, w] => GridShape::new_3d(d, h, w),
            _ => return Err(GeopeError::InvalidConfig(format!("bad grid `{s}`, expected HxW or DxHxW"))),
        };
        if dims.contains(&0) {
            return Err(GeopeError::InvalidConfig(format!("grid `{s}` has a zero extent")));
        }
        Ok(shape)
    }
}

/// Operators for every position of a grid, built once and shared by
/// queries and keys. Indexed by token.
#[derive(Debug, Clone)]
pub struct OperatorGrid {
    pub shape: GridShape,
    pub positions: Vec<GridPosition>,
    pub operators: Vec<GeoPEOperator>,
}

impl OperatorGrid {
    pub fn build(positions: Vec<GridPosition>, shape: GridShape, schedule: &PhaseSchedule, mode: Mode) -> Result<Self> {
        let operators = positions
            .iter()
            .map(|p| build_operator(p, schedule, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape, positions, operators })
    }

    #[inline]
    pub fn get(&self, token: usize) -> &GeoPEOperator {
        &self.operators[token]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{geometric_mean, geometric_mean_of_logs, LieVector};
    use crate::quat::axis_angle;
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;

    #[test]
    fn phase_examples() {
        let s = PhaseSchedule::new(6).with_sign(ExponentSign::Positive);
        let ph = phases(&GridPosition::new(1, 0), 0, &s, Mode::TwoD).unwrap();
        assert_eq!((ph.theta_h, ph.theta_w), (1.0, 0.0));

        // 2i/d = 1/2
        let s = PhaseSchedule::new(12).with_sign(ExponentSign::Positive);
        let ph = phases(&GridPosition::new(2, 0), 3, &s, Mode::TwoD).unwrap();
        assert_eq!(ph.theta_h, 20.0);

        // 3·100^(−1/6), 4·100^(−1/6), evaluated at 30 digits
        let s = PhaseSchedule::new(12);
        let ph = phases(&GridPosition::new(3, 4), 1, &s, Mode::TwoD).unwrap();
        assert!((ph.theta_h - 1.392_476_650_083_833_7).abs() < 1e-15);
        assert!((ph.theta_w - 1.856_635_533_445_111_6).abs() < 1e-15);
    }

    #[test]
    fn phase_index_bounds() {
        let s = PhaseSchedule::new(12);
        assert!(matches!(
            phases(&GridPosition::ORIGIN, 4, &s, Mode::TwoD),
            Err(GeopeError::IndexOutOfRange { index: 4, lo: 0, hi: 3 })
        ));
        let s = s.with_convention(IndexConvention::OneBased);
        assert!(phases(&GridPosition::ORIGIN, 0, &s, Mode::TwoD).is_err());
        assert!(phases(&GridPosition::ORIGIN, 4, &s, Mode::TwoD).is_ok());
        // 1D has d/2 blocks
        assert!(phases(&GridPosition::ORIGIN, 6, &s, Mode::OneD).is_ok());
    }

    #[test]
    fn build_2d_examples() {
        assert_eq!(build_2d(0.0, 0.0), UnitQuaternion::IDENTITY);
        let q = build_2d(PI, 0.0).quaternion();
        let h = 0.707_106_781_186_547_5;
        assert!(q.max_abs_diff(&Quaternion::new(h, 0.0, h, 0.0)) < 1e-15);
        // high-precision evaluation of the closed form at (π, π)
        let q = build_2d(PI, PI).quaternion();
        let want = Quaternion::new(0.444_015_840_326_213_2, 0.0, 0.633_581_065_665_399_6, 0.633_581_065_665_399_6);
        assert!(q.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn build_3d_examples() {
        assert_eq!(build_3d(0.0, 0.0, 0.0), UnitQuaternion::IDENTITY);
        let q = build_3d(PI, 0.0, 0.0).quaternion();
        assert!(q.max_abs_diff(&Quaternion::new(0.866_025_403_784_438_6, 0.5, 0.0, 0.0)) < 1e-15);
        let a = build_3d(0.3, -1.2, 2.5).quaternion();
        let b = build_3d(2.5, 0.3, -1.2).quaternion();
        assert_eq!(a.w, b.w);
        assert_eq!((a.x, a.y, a.z), (b.y, b.z, b.x));
    }

    #[test]
    fn build_1d_examples() {
        assert_eq!(build_1d(0.0), UnitQuaternion::IDENTITY);
        let v = sandwich_rotate(&build_1d(FRAC_PI_2), &Vector3::X);
        assert!(v.max_abs_diff(&Vector3::new(0.0, 0.0, -1.0)) < 1e-15);
    }

    #[test]
    fn rotation_block_examples() {
        assert_eq!(rotation_block(0.0, 0.0), Mat3::IDENTITY);
        for (h, w) in [(0.3, 0.4), (-5.0, 2.0), (7.0, -9.5)] {
            let m = rotation_block(h, w);
            let coupled = 0.5 * f64::hypot(h, w);
            assert!((m.at(0, 0) - coupled.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn rope_reference_examples() {
        assert_eq!(rope_reference_1d((0.3, -0.2), 0.0), (0.3, -0.2));
        let (a, b) = rope_reference_1d((1.0, 0.0), FRAC_PI_2);
        assert!(a.abs() < 1e-16 && (b - 1.0).abs() < 1e-16);
        let (a, b) = rope_reference_1d((0.6, 0.8), PI);
        assert!((a + 0.6).abs() < 1e-15 && (b + 0.8).abs() < 1e-15);
    }

    #[test]
    fn operator_examples() {
        let s = PhaseSchedule::new(12);
        let op = build_operator(&GridPosition::ORIGIN, &s, Mode::TwoD).unwrap();
        assert!(op.blocks.iter().all(|b| b.quaternion == UnitQuaternion::IDENTITY));
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.37 - 1.0).collect();
        assert_eq!(op.apply(&x).unwrap(), x);

        let op = build_operator(&GridPosition::new(1, 1), &PhaseSchedule::new(6), Mode::TwoD).unwrap();
        assert_eq!(op.blocks.len(), 2);
        assert_ne!(op.blocks[0].phases.theta_h, op.blocks[1].phases.theta_h);

        let err = build_operator(&GridPosition::ORIGIN, &PhaseSchedule::new(64), Mode::TwoD).unwrap_err();
        assert!(matches!(err, GeopeError::DimensionMismatch(_)));
        assert!(build_operator(&GridPosition::ORIGIN, &PhaseSchedule::new(64), Mode::OneD).is_ok());
        assert!(build_operator(&GridPosition::ORIGIN, &PhaseSchedule::new(9), Mode::OneD).is_err());
    }

    #[test]
    fn single_block_half_phase_rotation() {
        // two_d with θ_h = π/2, θ_w = 0 couples to Θ = π/4 about j.
        let q = build_2d(FRAC_PI_2, 0.0);
        let mut op = build_operator(&GridPosition::ORIGIN, &PhaseSchedule::new(3), Mode::TwoD).unwrap();
        op.blocks[0].quaternion = q;
        op.blocks[0].matrix = to_rotation_matrix(&q);
        let h = (PI / 4.0).cos();
        let want = [h, 0.0, -h];
        let out = op.apply(&[1.0, 0.0, 0.0]).unwrap();
        let via_matrix = op.apply_matrix(&[1.0, 0.0, 0.0]).unwrap();
        for k in 0..3 {
            assert!((out[k] - want[k]).abs() < 1e-15);
            assert!((via_matrix[k] - want[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn one_d_operator_quarter_turn() {
        // d = 2, block 0 has unit frequency; position 1 gives θ = 1.
        let op = build_operator(&GridPosition::sequence(1), &PhaseSchedule::new(2), Mode::OneD).unwrap();
        let out = op.apply(&[1.0, 0.0]).unwrap();
        assert!((out[0] - 1f64.cos()).abs() < 1e-15 && (out[1] + 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let op = build_operator(&GridPosition::new(2, 3), &PhaseSchedule::new(6), Mode::TwoD).unwrap();
        assert!(matches!(op.apply(&[1.0; 5]), Err(GeopeError::DimensionMismatch(_))));
    }

    #[test]
    fn passthrough_leaves_tail_untouched() {
        let s = PhaseSchedule::new(8).with_remainder(Remainder::Passthrough);
        let op = build_operator(&GridPosition::new(3, 5), &s, Mode::TwoD).unwrap();
        assert_eq!(op.blocks.len(), 2);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let y = op.apply(&x).unwrap();
        assert_eq!(&y[6..], &x[6..]);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("14x14".parse::<GridShape>().unwrap(), GridShape::new(14, 14));
        assert_eq!("2x3x4".parse::<GridShape>().unwrap(), GridShape::new_3d(2, 3, 4));
        assert!("0x3".parse::<GridShape>().is_err());
        assert!("3".parse::<GridShape>().is_err());
        let pos = GridShape::new(2, 3).positions();
        assert_eq!(pos[4], GridPosition::new(1, 1));
    }

    fn r_axis(axis: Vector3, theta: f64) -> UnitQuaternion {
        axis_angle(&axis, theta).unwrap()
    }

    proptest! {
        #[test]
        fn closed_form_2d_matches_log_average(h in -20.0..20.0f64, w in -20.0..20.0f64) {
            let oracle = geometric_mean_of_logs(&[
                LieVector::from_axis_angle(&Vector3::Y, h),
                LieVector::from_axis_angle(&Vector3::Z, w),
            ]).unwrap();
            let q = build_2d(h, w).quaternion();
            prop_assert!(q.max_abs_diff_up_to_sign(&oracle.quaternion()) < 1e-12);
        }

        #[test]
        fn closed_form_2d_matches_principal_mean(h in -PI..PI, w in -PI..PI) {
            let oracle = geometric_mean(&[r_axis(Vector3::Y, h), r_axis(Vector3::Z, w)]).unwrap();
            prop_assert!(build_2d(h, w).quaternion().max_abs_diff_up_to_sign(&oracle.quaternion()) < 1e-12);
        }

        #[test]
        fn closed_form_3d_matches_log_average(d in -20.0..20.0f64, h in -20.0..20.0f64, w in -20.0..20.0f64) {
            let oracle = geometric_mean_of_logs(&[
                LieVector::from_axis_angle(&Vector3::X, d),
                LieVector::from_axis_angle(&Vector3::Y, h),
                LieVector::from_axis_angle(&Vector3::Z, w),
            ]).unwrap();
            let q = build_3d(d, h, w);
            prop_assert!(q.quaternion().max_abs_diff_up_to_sign(&oracle.quaternion()) < 1e-12);
            let coupled = (d * d + h * h + w * w).sqrt() / 3.0;
            // rotation angle is Θ modulo 2π
            let wrapped = coupled.rem_euclid(2.0 * PI);
            let wrapped = if wrapped > PI { 2.0 * PI - wrapped } else { wrapped };
            prop_assert!((q.angle() - wrapped).abs() < 1e-9);
        }

        #[test]
        fn axis_swap_mirrors(h in -20.0..20.0f64, w in -20.0..20.0f64) {
            let a = build_2d(h, w).quaternion();
            let b = build_2d(w, h).quaternion();
            prop_assert_eq!(a.w, b.w);
            prop_assert_eq!(a.y, b.z);
            prop_assert_eq!(a.z, b.y);
        }

        #[test]
        fn explicit_block_matches_quaternion(h in -10.0..10.0f64, w in -10.0..10.0f64) {
            let m = rotation_block(h, w);
            prop_assert!(m.max_abs_diff(&to_rotation_matrix(&build_2d(h, w))) < 1e-10);
        }

        #[test]
        fn one_d_is_rope_with_negated_angle(theta in -50.0..50.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let v = sandwich_rotate(&build_1d(theta), &Vector3::new(a, 0.0, b));
            let (ra, rb) = rope_reference_1d((a, b), -theta);
            prop_assert!((v.x - ra).abs() < 1e-12 && (v.z - rb).abs() < 1e-12 && v.y.abs() < 1e-12);
        }

        #[test]
        fn operator_preserves_subvector_norms(ph in -30i64..30, pw in -30i64..30, seed in proptest::collection::vec(-2.0..2.0f64, 12)) {
            let s = PhaseSchedule::new(12);
            let op = build_operator(&GridPosition::new(ph, pw), &s, Mode::TwoD).unwrap();
            let y = op.apply(&seed).unwrap();
            let ym = op.apply_matrix(&seed).unwrap();
            for k in 0..4 {
                let n_in = Vector3::from_slice(&seed[3 * k..3 * k + 3]).norm();
                let n_out = Vector3::from_slice(&y[3 * k..3 * k + 3]).norm();
                prop_assert!((n_in - n_out).abs() <= 1e-12 * n_in.max(1.0));
            }
            for k in 0..12 {
                prop_assert!((y[k] - ym[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn phases_are_linear_in_position(p in 0i64..500, i in 0usize..8) {
            let s = PhaseSchedule::new(24);
            let a = phases(&GridPosition::new(p, 0), i, &s, Mode::TwoD).unwrap();
            let b = phases(&GridPosition::new(p + 1, 0), i, &s, Mode::TwoD).unwrap();
            let slope = s.frequency(i);
            prop_assert!(slope > 0.0);
            prop_assert!(((b.theta_h - a.theta_h) - slope).abs() <= 1e-12 * (p as f64 + 1.0));
        }
    }
}
