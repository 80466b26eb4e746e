//! Log/exp maps between unit quaternions and so(3), and the log-average
//! ("geometric mean") of rotations.
//!
//! Convention: `exp(u) = cos|u| + sin|u| · u/|u|`, so `|u|` is the *half*
//! rotation angle.

use serde::{Deserialize, Serialize};

use crate::error::{GeopeError, Result};
use crate::quat::{Quaternion, UnitQuaternion, Vector3};

/// Below this magnitude `sin(x)/x`-style ratios switch to their series.
pub const SERIES_THRESHOLD: f64 = 1e-8;

/// Element of so(3) in vector form.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LieVector(pub Vector3);

impl LieVector {
    pub const ZERO: LieVector = LieVector(Vector3::ZERO);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    /// Log of `cos(angle/2) + sin(angle/2)·axis` taken on the unwrapped
    /// branch, i.e. `(angle/2)·axis` for any real `angle`. `axis` must be unit.
    #[inline]
    pub fn from_axis_angle(axis: &Vector3, angle: f64) -> Self {
        Self(axis.scale(0.5 * angle))
    }

    #[inline]
    pub fn vector(&self) -> Vector3 {
        self.0
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs_diff(&self, other: &LieVector) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl std::ops::Sub for LieVector {
    type Output = LieVector;
    fn sub(self, rhs: LieVector) -> LieVector {
        LieVector(self.0 - rhs.0)
    }
}

impl std::ops::Add for LieVector {
    type Output = LieVector;
    fn add(self, rhs: LieVector) -> LieVector {
        LieVector(self.0 + rhs.0)
    }
}

impl std::ops::Neg for LieVector {
    type Output = LieVector;
    fn neg(self) -> LieVector {
        LieVector(-self.0)
    }
}

/// Principal logarithm. The rotor is canonicalized to `w ≥ 0` first, so the
/// returned half-angle lies in `[0, π/2]`.
pub fn log_map(r: &UnitQuaternion) -> LieVector {
    let c = r.canonical();
    let v = c.vector();
    let vn = v.norm();
    let factor = if vn < SERIES_THRESHOLD {
        // α / sin α with sin α = vn
        1.0 + vn * vn / 6.0
    } else {
        vn.atan2(c.w()) / vn
    };
    LieVector(v.scale(factor))
}

/// Logarithm of a raw quaternion; fails unless it is unit within tolerance.
pub fn log_map_checked(q: &Quaternion) -> Result<LieVector> {
    Ok(log_map(&UnitQuaternion::new(*q)?))
}

pub fn exp_map(u: &LieVector) -> UnitQuaternion {
    let n = u.norm();
    let (w, factor) = if n < SERIES_THRESHOLD {
        (1.0 - 0.5 * n * n, 1.0 - n * n / 6.0)
    } else {
        let (s, c) = n.sin_cos();
        (c, s / n)
    };
    UnitQuaternion::new_unchecked(Quaternion::from_scalar_vector(w, u.0.scale(factor)))
}

/// Uniform mean of Lie vectors. Summands are sorted before accumulation so
/// the result does not depend on input order, bit for bit.
pub fn mean_of_logs(logs: &[LieVector]) -> Result<LieVector> {
    if logs.is_empty() {
        return Err(GeopeError::EmptyList);
    }
    let mut sorted: Vec<Vector3> = logs.iter().map(|l| l.0).collect();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    let mut sum = Vector3::ZERO;
    for v in sorted {
        sum += v;
    }
    let n = logs.len() as f64;
    Ok(LieVector(Vector3::new(sum.x / n, sum.y / n, sum.z / n)))
}

/// `exp(mean(log rᵢ))` using the principal log of every element.
pub fn geometric_mean(rotations: &[UnitQuaternion]) -> Result<UnitQuaternion> {
    let logs: Vec<LieVector> = rotations.iter().map(log_map).collect();
    Ok(exp_map(&mean_of_logs(&logs)?))
}

/// Same as [`geometric_mean`] for raw quaternions, validating unit norm.
pub fn geometric_mean_checked(rotations: &[Quaternion]) -> Result<UnitQuaternion> {
    if rotations.is_empty() {
        return Err(GeopeError::EmptyList);
    }
    let units = rotations
        .iter()
        .map(|q| UnitQuaternion::new(*q))
        .collect::<Result<Vec<_>>>()?;
    geometric_mean(&units)
}

/// `exp(mean(logs))` for logs supplied directly (no branch cut involved).
pub fn geometric_mean_of_logs(logs: &[LieVector]) -> Result<UnitQuaternion> {
    Ok(exp_map(&mean_of_logs(logs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::axis_angle;
    use std::f64::consts::{FRAC_PI_4, PI};

    use proptest::prelude::*;

    fn r_h(theta: f64) -> UnitQuaternion {
        axis_angle(&Vector3::Y, theta).unwrap()
    }

    fn r_w(theta: f64) -> UnitQuaternion {
        axis_angle(&Vector3::Z, theta).unwrap()
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_map(&UnitQuaternion::IDENTITY), LieVector::ZERO);
        let q = UnitQuaternion::new(Quaternion::new(FRAC_PI_4.cos(), 0.0, FRAC_PI_4.sin(), 0.0))
            .unwrap();
        assert!(log_map(&q).max_abs_diff(&LieVector::new(0.0, FRAC_PI_4, 0.0)) < 1e-15);
        let theta_h = 0.6;
        assert!(log_map(&r_h(theta_h)).max_abs_diff(&LieVector::new(0.0, 0.3, 0.0)) < 1e-15);
    }

    #[test]
    fn log_rejects_non_unit() {
        assert!(matches!(
            log_map_checked(&Quaternion::new(0.5, 0.0, 0.0, 0.0)),
            Err(GeopeError::NonUnitRotor { .. })
        ));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_map(&LieVector::ZERO), UnitQuaternion::IDENTITY);
        let q = exp_map(&LieVector::new(0.0, FRAC_PI_4, 0.0)).quaternion();
        let h = FRAC_PI_4.cos();
        assert!(q.max_abs_diff(&Quaternion::new(h, 0.0, h, 0.0)) < 1e-15);
    }

    #[test]
    fn mean_examples() {
        let id = UnitQuaternion::IDENTITY;
        assert_eq!(geometric_mean(&[id, id]).unwrap(), id);
        let m = geometric_mean(&[r_h(PI), r_w(0.0)]).unwrap().quaternion();
        let h = FRAC_PI_4.cos();
        assert!(m.max_abs_diff(&Quaternion::new(h, 0.0, h, 0.0)) < 1e-15);
        assert_eq!(geometric_mean(&[]), Err(GeopeError::EmptyList));
        assert!(geometric_mean_checked(&[Quaternion::new(2.0, 0.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn small_angle_round_trip() {
        for mag in [1e-12, 1e-9, 1e-6] {
            let u = LieVector(Vector3::new(1.0, -2.0, 0.5).scale(mag / 5.25f64.sqrt()));
            let back = log_map(&exp_map(&u));
            assert!(back.max_abs_diff(&u) <= 1e-12, "mag {mag}");
        }
    }

    proptest! {
        #[test]
        fn exp_is_unit(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
            let q = exp_map(&LieVector::new(x, y, z));
            prop_assert!((q.quaternion().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn log_exp_round_trip(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            let u = LieVector::new(x, y, z);
            prop_assume!(u.norm() < std::f64::consts::FRAC_PI_2 - 1e-6);
            prop_assert!(log_map(&exp_map(&u)).max_abs_diff(&u) < 1e-12);
        }

        #[test]
        fn mean_is_order_independent(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
            let qs = [r_h(a), r_w(b), axis_angle(&Vector3::X, c).unwrap()];
            let m1 = geometric_mean(&qs).unwrap();
            let m2 = geometric_mean(&[qs[2], qs[0], qs[1]]).unwrap();
            let m3 = geometric_mean(&[qs[1], qs[2], qs[0]]).unwrap();
            prop_assert_eq!(m1, m2);
            prop_assert_eq!(m1, m3);
        }

        #[test]
        fn mean_log_matches_quarter_phases(th in -PI..PI, tw in -PI..PI) {
            let logs = [log_map(&r_h(th)), log_map(&r_w(tw))];
            let m = mean_of_logs(&logs).unwrap();
            prop_assert!(m.max_abs_diff(&LieVector::new(0.0, th / 4.0, tw / 4.0)) <= 1e-15);
        }

        #[test]
        fn mean_angle_is_coupled_phase(th in -PI..PI, tw in -PI..PI) {
            let angle = geometric_mean(&[r_h(th), r_w(tw)]).unwrap().angle();
            let coupled = 0.5 * (th * th + tw * tw).sqrt();
            prop_assert!((angle - coupled).abs() < 1e-12);
        }
    }
}
