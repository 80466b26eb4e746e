//! Linear GeoPE: relative rotations from differences of Lie vectors.
//!
//! For a query at `m` and a key at `n` the relative generator is
//! `u_rel = u_n − u_m`, which is linear in the displacement. Rotations are
//! therefore a function of `n − m` only and can be cached per displacement.

use serde::Serialize;

use crate::error::{GeopeError, Result};
use crate::lie::{exp_map, LieVector};
use crate::operator::{GridPosition, GridShape, Mode, PhaseSchedule};
use crate::quat::{axis_angle, to_rotation_matrix, Mat3, Vector3, UNIT_TOLERANCE};

/// Signed position difference, key minus query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Displacement {
    pub d_d: Option<i64>,
    pub d_h: i64,
    pub d_w: i64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { d_d: None, d_h: 0, d_w: 0 };

    pub const fn new(d_h: i64, d_w: i64) -> Self {
        Self { d_d: None, d_h, d_w }
    }

    pub fn between(query: &GridPosition, key: &GridPosition) -> Self {
        let d_d = match (query.p_d, key.p_d) {
            (None, None) => None,
            (q, k) => Some(k.unwrap_or(0) - q.unwrap_or(0)),
        };
        Self { d_d, d_h: key.p_h - query.p_h, d_w: key.p_w - query.p_w }
    }

    pub fn negated(&self) -> Self {
        Self { d_d: self.d_d.map(|d| -d), d_h: -self.d_h, d_w: -self.d_w }
    }

    pub fn norm(&self) -> f64 {
        let d = self.d_d.unwrap_or(0) as f64;
        let h = self.d_h as f64;
        let w = self.d_w as f64;
        (d * d + h * h + w * w).sqrt()
    }
}

/// One block of a relative rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeEntry {
    pub generator: LieVector,
    /// Rotation angle `A`.
    pub angle: f64,
    /// Unit axis, or zero when `angle == 0`.
    pub axis: Vector3,
    pub matrix: Mat3,
}

impl RelativeEntry {
    pub const IDENTITY: RelativeEntry = RelativeEntry {
        generator: LieVector::ZERO,
        angle: 0.0,
        axis: Vector3::ZERO,
        matrix: Mat3::IDENTITY,
    };
}

/// Relative rotation for every block of a head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeRotation {
    pub displacement: Displacement,
    pub entries: Vec<RelativeEntry>,
}

impl RelativeRotation {
    pub fn for_displacement(delta: &Displacement, schedule: &PhaseSchedule) -> Result<Self> {
        let n = schedule.block_count(Mode::TwoD)?;
        let entries = (0..n)
            .map(|k| relative_rotation(delta, schedule.schedule_index(k), schedule))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { displacement: *delta, entries })
    }

    /// `Σᵢ ⟨qᵢ, Mᵢ kᵢ⟩`, plus the plain dot product of any passthrough tail.
    pub fn score(&self, q: &[f64], k: &[f64]) -> f64 {
        let mut total = 0.0;
        for (b, entry) in self.entries.iter().enumerate() {
            let o = 3 * b;
            total += relative_score(&Vector3::from_slice(&q[o..o + 3]), &Vector3::from_slice(&k[o..o + 3]), entry);
        }
        let tail = 3 * self.entries.len();
        for (a, b) in q[tail..].iter().zip(&k[tail..]) {
            total += a * b;
        }
        total
    }

    pub fn score_f32(&self, q: &[f32], k: &[f32]) -> f32 {
        let mut total = 0.0f32;
        for (b, entry) in self.entries.iter().enumerate() {
            let o = 3 * b;
            let m = entry.matrix.to_f32();
            let (k0, k1, k2) = (k[o], k[o + 1], k[o + 2]);
            total += q[o] * (m[0] * k0 + m[1] * k1 + m[2] * k2)
                + q[o + 1] * (m[3] * k0 + m[4] * k1 + m[5] * k2)
                + q[o + 2] * (m[6] * k0 + m[7] * k1 + m[8] * k2);
        }
        let tail = 3 * self.entries.len();
        for (a, b) in q[tail..].iter().zip(&k[tail..]) {
            total += a * b;
        }
        total
    }
}

/// Three-term split of `⟨q, R k⟩` for a rotation by `A` about `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreDecomposition {
    /// `⟨q, k⟩ cos A`
    pub projected_similarity: f64,
    /// `(q·n)(k·n)(1 − cos A)`
    pub axial_alignment: f64,
    /// `−((n × q)·k) sin A`
    pub torsional: f64,
    pub total: f64,
}

/// `u_k − u_q`.
#[inline]
pub fn relative_lie_vector(u_q: &LieVector, u_k: &LieVector) -> LieVector {
    *u_k - *u_q
}

/// Absolute Lie vector of a position: `(0, θ_h/4, θ_w/4)` on a 2D grid or
/// `(θ_d, θ_h, θ_w)/6` on a 3D grid.
pub fn lie_vector_at(pos: &GridPosition, i: usize, schedule: &PhaseSchedule) -> Result<LieVector> {
    let f = schedule.frequency_checked(Mode::TwoD, i)?;
    Ok(generator(pos.p_d.map(|d| d as f64 * f), pos.p_h as f64 * f, pos.p_w as f64 * f))
}

fn generator(theta_d: Option<f64>, theta_h: f64, theta_w: f64) -> LieVector {
    match theta_d {
        None => LieVector::new(0.0, theta_h / 4.0, theta_w / 4.0),
        Some(d) => LieVector::new(d / 6.0, theta_h / 6.0, theta_w / 6.0),
    }
}

/// Relative rotation of block `i` for displacement `delta`.
///
/// Phase differences are formed as `Δp · λ^{s·2i/d}` directly from the integer
/// displacement, so the entry is bit-identical for every pair of positions
/// sharing that displacement.
pub fn relative_rotation(delta: &Displacement, i: usize, schedule: &PhaseSchedule) -> Result<RelativeEntry> {
    let f = schedule.frequency_checked(Mode::TwoD, i)?;
    let dth_d = delta.d_d.map(|d| d as f64 * f);
    let dth_h = delta.d_h as f64 * f;
    let dth_w = delta.d_w as f64 * f;
    let generator = generator(dth_d, dth_h, dth_w);

    let sq = dth_d.map_or(0.0, |d| d * d) + dth_h * dth_h + dth_w * dth_w;
    if sq == 0.0 {
        return Ok(RelativeEntry::IDENTITY);
    }
    let root = sq.sqrt();
    let angle = match dth_d {
        None => 0.5 * root,
        Some(_) => root / 3.0,
    };
    let axis = Vector3::new(dth_d.unwrap_or(0.0) / root, dth_h / root, dth_w / root);
    let matrix = to_rotation_matrix(&exp_map(&generator));
    Ok(RelativeEntry { generator, angle, axis, matrix })
}

/// `⟨q, M k⟩` with the entry's cached matrix.
#[inline]
pub fn relative_score(q: &Vector3, k: &Vector3, rel: &RelativeEntry) -> f64 {
    q.dot(&rel.matrix.mul_vec(k))
}

/// Splits `⟨q, R(A, n) k⟩` into projected, axial and torsional parts.
///
/// The torsional sign is the one that makes `total` equal the rotated inner
/// product for the right-handed rotation `R(A, n) = to_rotation_matrix(axis_angle(n, A))`.
pub fn decompose_score(q: &Vector3, k: &Vector3, angle: f64, axis: &Vector3) -> Result<ScoreDecomposition> {
    let (sin_a, cos_a) = angle.sin_cos();
    let qk = q.dot(k);
    if angle == 0.0 {
        return Ok(ScoreDecomposition { projected_similarity: qk, axial_alignment: 0.0, torsional: 0.0, total: qk });
    }
    let norm = axis.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GeopeError::NonUnitAxis { norm });
    }
    let projected_similarity = qk * cos_a;
    let axial_alignment = q.dot(axis) * k.dot(axis) * (1.0 - cos_a);
    let torsional = -(axis.cross(q).dot(k)) * sin_a;
    Ok(ScoreDecomposition {
        projected_similarity,
        axial_alignment,
        torsional,
        total: projected_similarity + axial_alignment + torsional,
    })
}

/// Direct `⟨q, R k⟩` for `R` built from axis and angle; the oracle for
/// [`decompose_score`].
pub fn rotated_inner_product(q: &Vector3, k: &Vector3, angle: f64, axis: &Vector3) -> Result<f64> {
    let r = axis_angle(axis, angle)?;
    Ok(q.dot(&to_rotation_matrix(&r).mul_vec(k)))
}

/// Dense cache of relative rotations for every displacement inside an
/// `H × W` grid, indexed by `(Δh + H − 1, Δw + W − 1)`.
#[derive(Debug, Clone)]
pub struct DisplacementTable {
    pub height: usize,
    pub width: usize,
    pub schedule: PhaseSchedule,
    entries: Vec<RelativeRotation>,
}

impl DisplacementTable {
    pub fn build(height: usize, width: usize, schedule: &PhaseSchedule) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(GeopeError::InvalidConfig("displacement table needs H, W ≥ 1".into()));
        }
        let (h, w) = (height as i64, width as i64);
        let mut entries = Vec::with_capacity((2 * height - 1) * (2 * width - 1));
        for dh in -(h - 1)..h {
            for dw in -(w - 1)..w {
                entries.push(RelativeRotation::for_displacement(&Displacement::new(dh, dw), schedule)?);
            }
        }
        Ok(Self { height, width, schedule: *schedule, entries })
    }

    pub fn for_grid(shape: &GridShape, schedule: &PhaseSchedule) -> Result<Self> {
        if shape.depth.is_some_and(|d| d > 1) {
            return Err(GeopeError::InvalidConfig("displacement table covers 2D grids only".into()));
        }
        Self::build(shape.height, shape.width, schedule)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RelativeRotation] {
        &self.entries
    }

    pub fn get(&self, delta: &Displacement) -> Option<&RelativeRotation> {
        if delta.d_d.is_some_and(|d| d != 0) {
            return None;
        }
        let (h, w) = (self.height as i64, self.width as i64);
        let row = delta.d_h + h - 1;
        let col = delta.d_w + w - 1;
        if row < 0 || col < 0 || row >= 2 * h - 1 || col >= 2 * w - 1 {
            return None;
        }
        Some(&self.entries[(row * (2 * w - 1) + col) as usize])
    }

    pub fn lookup(&self, query: &GridPosition, key: &GridPosition) -> Option<&RelativeRotation> {
        self.get(&Displacement::between(query, key))
    }

    /// Approximate heap footprint of the cached matrices and generators.
    pub fn memory_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + self
                .entries
                .iter()
                .map(|e| std::mem::size_of::<RelativeRotation>() + e.entries.len() * std::mem::size_of::<RelativeEntry>())
                .sum::<usize>()
    }
}
