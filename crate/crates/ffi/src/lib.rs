//! C ABI over the geope kernels.
//!
//! Every fallible call returns a [`GeopeStatus`] and writes results through
//! out-pointers. Operators and displacement tables are opaque handles owned
//! by the caller and released with their `_free` function. Panics never
//! cross the boundary; they surface as `GEOPE_STATUS_PANIC`.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geope::{
    build_2d as core_build_2d, build_3d as core_build_3d, build_operator, decompose_score as core_decompose,
    geometric_mean as core_geometric_mean, DisplacementTable, ExponentSign, GeoPEOperator, GeopeError, GridPosition,
    IndexConvention, Mode, PhaseSchedule, Quaternion, Remainder, UnitQuaternion, Vector3,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeopeStatus {
    Ok = 0,
    NullPointer = 1,
    NonUnitRotor = 2,
    ZeroAxis = 3,
    NonUnitAxis = 4,
    EmptyList = 5,
    DimensionMismatch = 6,
    IndexOutOfRange = 7,
    InvalidConfig = 8,
    Panic = 9,
}

impl From<&GeopeError> for GeopeStatus {
    fn from(e: &GeopeError) -> Self {
        match e {
            GeopeError::NonUnitRotor { .. } => GeopeStatus::NonUnitRotor,
            GeopeError::ZeroAxis => GeopeStatus::ZeroAxis,
            GeopeError::NonUnitAxis { .. } => GeopeStatus::NonUnitAxis,
            GeopeError::EmptyList => GeopeStatus::EmptyList,
            GeopeError::DimensionMismatch(_) => GeopeStatus::DimensionMismatch,
            GeopeError::IndexOutOfRange { .. } => GeopeStatus::IndexOutOfRange,
            GeopeError::InvalidConfig(_) => GeopeStatus::InvalidConfig,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeopeMode {
    OneD = 1,
    TwoD = 2,
    ThreeD = 3,
}

fn mode_from_raw(raw: i32) -> Result<Mode, GeopeStatus> {
    match raw {
        r if r == GeopeMode::OneD as i32 => Ok(Mode::OneD),
        r if r == GeopeMode::TwoD as i32 => Ok(Mode::TwoD),
        r if r == GeopeMode::ThreeD as i32 => Ok(Mode::ThreeD),
        _ => Err(GeopeStatus::InvalidConfig),
    }
}

/// Frequency schedule. Flags are 0 or 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeopeSchedule {
    pub base_lambda: f64,
    pub head_dim: usize,
    pub one_based: i32,
    pub positive_exponent: i32,
    pub passthrough: i32,
}

impl From<&GeopeSchedule> for PhaseSchedule {
    fn from(s: &GeopeSchedule) -> Self {
        PhaseSchedule::new(s.head_dim)
            .with_base(s.base_lambda)
            .with_convention(if s.one_based != 0 { IndexConvention::OneBased } else { IndexConvention::ZeroBased })
            .with_sign(if s.positive_exponent != 0 { ExponentSign::Positive } else { ExponentSign::Negative })
            .with_remainder(if s.passthrough != 0 { Remainder::Passthrough } else { Remainder::Strict })
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeopeQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<UnitQuaternion> for GeopeQuaternion {
    fn from(q: UnitQuaternion) -> Self {
        let [w, x, y, z] = q.to_array();
        Self { w, x, y, z }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeopeScoreDecomposition {
    pub projected_similarity: f64,
    pub axial_alignment: f64,
    pub torsional: f64,
    pub total: f64,
}

/// Opaque per-position operator.
pub struct GeopeOperator(GeoPEOperator);

/// Opaque cache of relative rotations for an `H × W` grid.
pub struct GeopeDisplacementTable(DisplacementTable);

fn guard(f: impl FnOnce() -> Result<(), GeopeStatus>) -> GeopeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GeopeStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => GeopeStatus::Panic,
    }
}

fn lift<T>(r: geope::Result<T>) -> Result<T, GeopeStatus> {
    r.map_err(|e| GeopeStatus::from(&e))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, GeopeStatus> {
    p.as_mut().ok_or(GeopeStatus::NullPointer)
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], GeopeStatus> {
    if p.is_null() {
        return Err(GeopeStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn vec3(p: *const f64) -> Result<Vector3, GeopeStatus> {
    Ok(Vector3::from_slice(slice(p, 3)?))
}

/// Static, NUL-terminated description of a [`GeopeStatus`] value.
#[no_mangle]
pub extern "C" fn geope_status_str(status: i32) -> *const c_char {
    const ALL: [GeopeStatus; 10] = [
        GeopeStatus::Ok,
        GeopeStatus::NullPointer,
        GeopeStatus::NonUnitRotor,
        GeopeStatus::ZeroAxis,
        GeopeStatus::NonUnitAxis,
        GeopeStatus::EmptyList,
        GeopeStatus::DimensionMismatch,
        GeopeStatus::IndexOutOfRange,
        GeopeStatus::InvalidConfig,
        GeopeStatus::Panic,
    ];
    let s: &'static [u8] = match ALL.into_iter().find(|s| *s as i32 == status) {
        Some(GeopeStatus::Ok) => b"ok\0",
        Some(GeopeStatus::NullPointer) => b"null pointer argument\0",
        Some(GeopeStatus::NonUnitRotor) => b"rotor is not a unit quaternion\0",
        Some(GeopeStatus::ZeroAxis) => b"rotation axis has zero length\0",
        Some(GeopeStatus::NonUnitAxis) => b"rotation axis is not unit length\0",
        Some(GeopeStatus::EmptyList) => b"empty rotation list\0",
        Some(GeopeStatus::DimensionMismatch) => b"dimension mismatch\0",
        Some(GeopeStatus::IndexOutOfRange) => b"sub-vector index out of range\0",
        Some(GeopeStatus::InvalidConfig) => b"invalid configuration\0",
        Some(GeopeStatus::Panic) => b"internal panic\0",
        None => b"unknown status\0",
    };
    s.as_ptr().cast()
}

/// Default schedule (λ = 100, zero-based, negative exponent, strict).
#[no_mangle]
pub extern "C" fn geope_schedule_default(head_dim: usize) -> GeopeSchedule {
    GeopeSchedule { base_lambda: 100.0, head_dim, one_based: 0, positive_exponent: 0, passthrough: 0 }
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geope_build_2d(theta_h: f64, theta_w: f64, out: *mut GeopeQuaternion) -> GeopeStatus {
    guard(|| {
        *out_ref(out)? = core_build_2d(theta_h, theta_w).into();
        Ok(())
    })
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geope_build_3d(
    theta_d: f64,
    theta_h: f64,
    theta_w: f64,
    out: *mut GeopeQuaternion,
) -> GeopeStatus {
    guard(|| {
        *out_ref(out)? = core_build_3d(theta_d, theta_h, theta_w).into();
        Ok(())
    })
}

/// Log-average of `n` unit quaternions.
///
/// # Safety
/// `rotations` must point to `n` readable quaternions; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn geope_geometric_mean(
    rotations: *const GeopeQuaternion,
    n: usize,
    out: *mut GeopeQuaternion,
) -> GeopeStatus {
    guard(|| {
        let out = out_ref(out)?;
        if n == 0 {
            return Err(GeopeStatus::EmptyList);
        }
        let units = slice(rotations, n)?
            .iter()
            .map(|q| lift(UnitQuaternion::new(Quaternion::new(q.w, q.x, q.y, q.z))))
            .collect::<Result<Vec<_>, _>>()?;
        *out = lift(core_geometric_mean(&units))?.into();
        Ok(())
    })
}

/// Splits `⟨q, R(angle, axis) k⟩` into its three terms.
///
/// # Safety
/// `q`, `k` and `axis` must each point to 3 readable doubles; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn geope_decompose_score(
    q: *const f64,
    k: *const f64,
    angle: f64,
    axis: *const f64,
    out: *mut GeopeScoreDecomposition,
) -> GeopeStatus {
    guard(|| {
        let out = out_ref(out)?;
        let d = lift(core_decompose(&vec3(q)?, &vec3(k)?, angle, &vec3(axis)?))?;
        *out = GeopeScoreDecomposition {
            projected_similarity: d.projected_similarity,
            axial_alignment: d.axial_alignment,
            torsional: d.torsional,
            total: d.total,
        };
        Ok(())
    })
}

/// Builds the operator for one position. `mode` is a [`GeopeMode`] value;
/// `p_d` is ignored outside 3D mode.
///
/// # Safety
/// `schedule` must be readable and `out` valid for writes. On success `*out`
/// owns a handle to release with [`geope_operator_free`].
#[no_mangle]
pub unsafe extern "C" fn geope_operator_new(
    schedule: *const GeopeSchedule,
    mode: i32,
    p_d: i64,
    p_h: i64,
    p_w: i64,
    out: *mut *mut GeopeOperator,
) -> GeopeStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let schedule = PhaseSchedule::from(schedule.as_ref().ok_or(GeopeStatus::NullPointer)?);
        let mode = mode_from_raw(mode)?;
        let pos = match mode {
            Mode::ThreeD => GridPosition::new_3d(p_d, p_h, p_w),
            _ => GridPosition::new(p_h, p_w),
        };
        let op = lift(build_operator(&pos, &schedule, mode))?;
        *out = Box::into_raw(Box::new(GeopeOperator(op)));
        Ok(())
    })
}

/// Head dimension the operator expects, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn geope_operator_head_dim(op: *const GeopeOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.head_dim)
}

/// Rotates `x` into `out`; both hold `len` doubles and may not overlap.
///
/// # Safety
/// `op` must be a live handle, `x` readable and `out` writable for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn geope_operator_apply(
    op: *const GeopeOperator,
    x: *const f64,
    out: *mut f64,
    len: usize,
) -> GeopeStatus {
    guard(|| {
        let op = op.as_ref().ok_or(GeopeStatus::NullPointer)?;
        let x = slice(x, len)?;
        if out.is_null() {
            return Err(GeopeStatus::NullPointer);
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        lift(op.0.apply_into(x, out))
    })
}

/// # Safety
/// `op` must be null or a handle from [`geope_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geope_operator_free(op: *mut GeopeOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Caches relative rotations for every displacement of an `height × width`
/// grid.
///
/// # Safety
/// `schedule` must be readable and `out` valid for writes. On success `*out`
/// owns a handle to release with [`geope_table_free`].
#[no_mangle]
pub unsafe extern "C" fn geope_table_new(
    schedule: *const GeopeSchedule,
    height: usize,
    width: usize,
    out: *mut *mut GeopeDisplacementTable,
) -> GeopeStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let schedule = PhaseSchedule::from(schedule.as_ref().ok_or(GeopeStatus::NullPointer)?);
        let table = lift(DisplacementTable::build(height, width, &schedule))?;
        *out = Box::into_raw(Box::new(GeopeDisplacementTable(table)));
        Ok(())
    })
}

/// Number of cached displacements, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn geope_table_len(table: *const GeopeDisplacementTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Raw relative score of a query at `(q_h, q_w)` and a key at `(k_h, k_w)`.
/// Displacements outside the grid give `GEOPE_STATUS_INDEX_OUT_OF_RANGE`.
///
/// # Safety
/// `table` must be a live handle, `q` and `k` readable for `len` doubles and
/// `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn geope_table_score(
    table: *const GeopeDisplacementTable,
    q_h: i64,
    q_w: i64,
    k_h: i64,
    k_w: i64,
    q: *const f64,
    k: *const f64,
    len: usize,
    out: *mut f64,
) -> GeopeStatus {
    guard(|| {
        let table = table.as_ref().ok_or(GeopeStatus::NullPointer)?;
        let out = out_ref(out)?;
        let (q, k) = (slice(q, len)?, slice(k, len)?);
        if len != table.0.schedule.head_dim {
            return Err(GeopeStatus::DimensionMismatch);
        }
        let rel = table
            .0
            .lookup(&GridPosition::new(q_h, q_w), &GridPosition::new(k_h, k_w))
            .ok_or(GeopeStatus::IndexOutOfRange)?;
        *out = rel.score(q, k);
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from [`geope_table_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geope_table_free(table: *mut GeopeDisplacementTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
