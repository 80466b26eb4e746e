//! GeoPE: quaternion rotary positional embeddings for 1D, 2D and 3D token grids.
//!
//! Feature vectors are split into 3-dimensional sub-vectors, each lifted to a
//! pure quaternion and rotated by a unit quaternion built from the token's
//! grid position. The per-axis rotations are combined symmetrically by
//! averaging their logarithms in so(3) and mapping back with the exponential.
//!
//! Modules, bottom up:
//! - [`quat`]: quaternion algebra and rotation primitives
//! - [`lie`]: log/exp maps and the log-average of rotations
//! - [`operator`]: phase schedules and per-position operators
//! - [`relative`]: the linear relative variant and the score decomposition
//! - [`attention`]: a small attention engine for analysis
//! - [`analysis`]: the command implementations behind the `geope` binary

pub mod analysis;
pub mod attention;
pub mod error;
pub mod lie;
pub mod operator;
pub mod quat;
pub mod relative;
pub mod rng;

pub use error::{GeopeError, Result};
pub use lie::{exp_map, geometric_mean, log_map, LieVector};
pub use operator::{
    apply_operator, build_1d, build_2d, build_3d, build_operator, phases, rope_reference_1d, rotation_block,
    ExponentSign, GeoPEOperator, GridPosition, GridShape, IndexConvention, Mode, PhaseSchedule, Phases, Remainder,
};
pub use quat::{axis_angle, conjugate, hamilton_product, sandwich_rotate, to_rotation_matrix, Mat3, Quaternion, UnitQuaternion, Vector3};
pub use relative::{
    decompose_score, relative_lie_vector, relative_rotation, relative_score, Displacement, DisplacementTable,
    RelativeEntry, RelativeRotation, ScoreDecomposition,
};
