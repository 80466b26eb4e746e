//! Quaternion arithmetic and SO(3) rotation primitives.
//!
//! Everything here is plain `f64` value types. A [`UnitQuaternion`] can only
//! be obtained through a validating constructor, so the rotation functions
//! that take one are total.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{GeopeError, Result};

/// Accepted deviation of `|q|` from 1 when a caller hands us a rotor.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A point or direction in R³, or the vector part of a pure quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vector3 = Vector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vector3 = Vector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vector3 = Vector3 { x: 0.0, y: 0.0, z: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(&self, other: &Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(&self, other: &Vector3) -> Vector3 {
        Vector3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Lift into H as a pure quaternion (scalar part exactly zero).
    #[inline]
    pub fn to_pure_quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    pub fn max_abs_diff(&self, other: &Vector3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    #[inline]
    fn add(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vector3 {
    #[inline]
    fn add_assign(&mut self, rhs: Vector3) {
        self.x += rhs.x;
        self.y += rhs.y;
        self.z += rhs.z;
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    #[inline]
    fn sub(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    #[inline]
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    #[inline]
    fn mul(self, s: f64) -> Vector3 {
        self.scale(s)
    }
}

/// `w + x i + y j + z k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub fn from_scalar_vector(s: f64, v: Vector3) -> Self {
        Self::new(s, v.x, v.y, v.z)
    }

    #[inline]
    pub fn scalar(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn vector(&self) -> Vector3 {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn conjugate(&self) -> Quaternion {
        conjugate(self)
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// General inverse `q* / |q|²`; `None` for the zero quaternion.
    pub fn inverse(&self) -> Option<Quaternion> {
        let n2 = self.norm_squared();
        if n2 == 0.0 {
            None
        } else {
            Some(self.conjugate().scale(1.0 / n2))
        }
    }

    /// `q p q⁻¹` for any non-zero `q`. Scale invariant in `q`.
    pub fn conjugate_by(&self, p: &Quaternion) -> Option<Quaternion> {
        let inv = self.inverse()?;
        Some(hamilton_product(&hamilton_product(self, p), &inv))
    }

    pub fn max_abs_diff(&self, other: &Quaternion) -> f64 {
        (self.w - other.w)
            .abs()
            .max((self.x - other.x).abs())
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }

    /// Componentwise distance to `other`, taking the closer of `other` and `-other`.
    pub fn max_abs_diff_up_to_sign(&self, other: &Quaternion) -> f64 {
        self.max_abs_diff(other).min(self.max_abs_diff(&-*other))
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, rhs: Quaternion) -> Quaternion {
        hamilton_product(&self, &rhs)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

/// Hamilton product `(s1 + v1)(s2 + v2) = s1 s2 − v1·v2 + s1 v2 + s2 v1 + v1 × v2`.
#[inline]
pub fn hamilton_product(a: &Quaternion, b: &Quaternion) -> Quaternion {
    let (s1, v1) = (a.w, a.vector());
    let (s2, v2) = (b.w, b.vector());
    let s = s1 * s2 - v1.dot(&v2);
    let v = v2.scale(s1) + v1.scale(s2) + v1.cross(&v2);
    Quaternion::from_scalar_vector(s, v)
}

#[inline]
pub fn conjugate(q: &Quaternion) -> Quaternion {
    Quaternion::new(q.w, -q.x, -q.y, -q.z)
}

/// A quaternion known to have unit norm (within [`UNIT_TOLERANCE`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::IDENTITY);

    /// Validates `|q| = 1` within [`UNIT_TOLERANCE`]; the value is stored as given.
    pub fn new(q: Quaternion) -> Result<Self> {
        let norm = q.norm();
        if (norm - 1.0).abs() <= UNIT_TOLERANCE {
            Ok(Self(q))
        } else {
            Err(GeopeError::NonUnitRotor { norm })
        }
    }

    /// Projects any non-zero finite quaternion onto the unit sphere.
    pub fn normalize(q: Quaternion) -> Result<Self> {
        let norm = q.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GeopeError::NonUnitRotor { norm });
        }
        Ok(Self(q.scale(1.0 / norm)))
    }

    /// Caller guarantees unit norm (closed forms that are unit by construction).
    #[inline]
    pub(crate) const fn new_unchecked(q: Quaternion) -> Self {
        Self(q)
    }

    #[inline]
    pub fn quaternion(&self) -> Quaternion {
        self.0
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.0.w
    }

    #[inline]
    pub fn vector(&self) -> Vector3 {
        self.0.vector()
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        self.0.to_array()
    }

    /// Re-projects onto the unit sphere to remove accumulated drift.
    pub fn renormalized(&self) -> Self {
        Self(self.0.scale(1.0 / self.0.norm()))
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        Self(self.0.conjugate())
    }

    #[inline]
    pub fn compose(&self, other: &UnitQuaternion) -> Self {
        Self(hamilton_product(&self.0, &other.0))
    }

    /// Representative of `{q, -q}` with `w ≥ 0`; at `w = 0` the first
    /// non-zero vector component is made non-negative.
    pub fn canonical(&self) -> Self {
        let q = self.0;
        let flip = if q.w != 0.0 {
            q.w < 0.0
        } else {
            [q.x, q.y, q.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            Self(-q)
        } else {
            self.with_positive_zero()
        }
    }

    fn with_positive_zero(&self) -> Self {
        // -0.0 + 0.0 == +0.0; keeps canonical forms bit-comparable.
        let q = self.0;
        Self(Quaternion::new(q.w + 0.0, q.x + 0.0, q.y + 0.0, q.z + 0.0))
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = self.canonical();
        2.0 * c.vector().norm().atan2(c.w())
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3) -> Vector3 {
        sandwich_rotate(self, v)
    }

    #[inline]
    pub fn to_rotation_matrix(&self) -> Mat3 {
        to_rotation_matrix(self)
    }
}

impl TryFrom<Quaternion> for UnitQuaternion {
    type Error = GeopeError;
    fn try_from(q: Quaternion) -> Result<Self> {
        Self::new(q)
    }
}

impl From<UnitQuaternion> for Quaternion {
    fn from(u: UnitQuaternion) -> Quaternion {
        u.0
    }
}

/// Rotates `v` by `r` through `r p r*` with `p` the pure lift of `v`.
pub fn sandwich_rotate(r: &UnitQuaternion, v: &Vector3) -> Vector3 {
    let q = r.quaternion();
    let p = v.to_pure_quaternion();
    let out = hamilton_product(&hamilton_product(&q, &p), &q.conjugate());
    debug_assert!(
        out.w.abs() <= 1e-12 * v.norm_squared().max(1.0),
        "sandwich product left scalar residue {}",
        out.w
    );
    out.vector()
}

/// Checked variant for raw quaternions.
pub fn sandwich_rotate_checked(r: &Quaternion, v: &Vector3) -> Result<Vector3> {
    Ok(sandwich_rotate(&UnitQuaternion::new(*r)?, v))
}

/// `cos(angle/2) + sin(angle/2) · axis/|axis|`.
pub fn axis_angle(axis: &Vector3, angle: f64) -> Result<UnitQuaternion> {
    if angle == 0.0 {
        return Ok(UnitQuaternion::IDENTITY);
    }
    let n = axis.norm();
    if n <= 1e-15 {
        return Err(GeopeError::ZeroAxis);
    }
    let (s, c) = (0.5 * angle).sin_cos();
    Ok(UnitQuaternion::new_unchecked(Quaternion::from_scalar_vector(
        c,
        axis.scale(s / n),
    )))
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [f64; 9]);

impl Default for Mat3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mat3 {
    #[rustfmt::skip]
    pub const IDENTITY: Mat3 = Mat3([
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
    ]);

    #[inline]
    pub fn from_rows(r0: [f64; 3], r1: [f64; 3], r2: [f64; 3]) -> Self {
        Mat3([r0[0], r0[1], r0[2], r1[0], r1[1], r1[2], r2[0], r2[1], r2[2]])
    }

    /// Entry at zero-based `(row, col)`.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.0[3 * row + col]
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vector3) -> Vector3 {
        let m = &self.0;
        Vector3::new(
            m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z,
        )
    }

    pub fn mul_mat(&self, other: &Mat3) -> Mat3 {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = (0..3).map(|k| self.at(r, k) * other.at(k, c)).sum();
            }
        }
        Mat3(out)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    pub fn max_abs_diff(&self, other: &Mat3) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max |RᵀR − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        self.transpose().mul_mat(self).max_abs_diff(&Mat3::IDENTITY)
    }

    pub fn to_f32(&self) -> [f32; 9] {
        self.0.map(|v| v as f32)
    }
}

/// Standard unit-quaternion to rotation-matrix conversion.
pub fn to_rotation_matrix(r: &UnitQuaternion) -> Mat3 {
    let Quaternion { w, x, y, z } = r.quaternion();
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Mat3::from_rows(
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    )
}
