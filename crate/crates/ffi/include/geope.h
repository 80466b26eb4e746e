#ifndef GEOPE_H
#define GEOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GeopeMode {
  GEOPE_MODE_ONE_D = 1,
  GEOPE_MODE_TWO_D = 2,
  GEOPE_MODE_THREE_D = 3,
} GeopeMode;

typedef enum GeopeStatus {
  GEOPE_STATUS_OK = 0,
  GEOPE_STATUS_NULL_POINTER = 1,
  GEOPE_STATUS_NON_UNIT_ROTOR = 2,
  GEOPE_STATUS_ZERO_AXIS = 3,
  GEOPE_STATUS_NON_UNIT_AXIS = 4,
  GEOPE_STATUS_EMPTY_LIST = 5,
  GEOPE_STATUS_DIMENSION_MISMATCH = 6,
  GEOPE_STATUS_INDEX_OUT_OF_RANGE = 7,
  GEOPE_STATUS_INVALID_CONFIG = 8,
  GEOPE_STATUS_PANIC = 9,
} GeopeStatus;

// Opaque cache of relative rotations for an `H × W` grid.
typedef struct GeopeDisplacementTable GeopeDisplacementTable;

// Opaque per-position operator.
typedef struct GeopeOperator GeopeOperator;

// Frequency schedule. Flags are 0 or 1.
typedef struct GeopeSchedule {
  double base_lambda;
  size_t head_dim;
  int32_t one_based;
  int32_t positive_exponent;
  int32_t passthrough;
} GeopeSchedule;

typedef struct GeopeQuaternion {
  double w;
  double x;
  double y;
  double z;
} GeopeQuaternion;

typedef struct GeopeScoreDecomposition {
  double projected_similarity;
  double axial_alignment;
  double torsional;
  double total;
} GeopeScoreDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static, NUL-terminated description of a [`GeopeStatus`] value.
const char *geope_status_str(int32_t status);

// Default schedule (λ = 100, zero-based, negative exponent, strict).
struct GeopeSchedule geope_schedule_default(size_t head_dim);

// # Safety
// `out` must be null or valid for writes.
enum GeopeStatus geope_build_2d(double theta_h, double theta_w, struct GeopeQuaternion *out);

// # Safety
// `out` must be null or valid for writes.
enum GeopeStatus geope_build_3d(double theta_d,
                                double theta_h,
                                double theta_w,
                                struct GeopeQuaternion *out);

// Log-average of `n` unit quaternions.
//
// # Safety
// `rotations` must point to `n` readable quaternions; `out` must be valid
// for writes.
enum GeopeStatus geope_geometric_mean(const struct GeopeQuaternion *rotations,
                                      size_t n,
                                      struct GeopeQuaternion *out);

// Splits `⟨q, R(angle, axis) k⟩` into its three terms.
//
// # Safety
// `q`, `k` and `axis` must each point to 3 readable doubles; `out` must be
// valid for writes.
enum GeopeStatus geope_decompose_score(const double *q,
                                       const double *k,
                                       double angle,
                                       const double *axis,
                                       struct GeopeScoreDecomposition *out);

// Builds the operator for one position. `mode` is a [`GeopeMode`] value;
// `p_d` is ignored outside 3D mode.
//
// # Safety
// `schedule` must be readable and `out` valid for writes. On success `*out`
// owns a handle to release with [`geope_operator_free`].
enum GeopeStatus geope_operator_new(const struct GeopeSchedule *schedule,
                                    int32_t mode,
                                    int64_t p_d,
                                    int64_t p_h,
                                    int64_t p_w,
                                    struct GeopeOperator **out);

// Head dimension the operator expects, or 0 for a null handle.
//
// # Safety
// `op` must be null or a live handle.
size_t geope_operator_head_dim(const struct GeopeOperator *op);

// Rotates `x` into `out`; both hold `len` doubles and may not overlap.
//
// # Safety
// `op` must be a live handle, `x` readable and `out` writable for `len`
// doubles.
enum GeopeStatus geope_operator_apply(const struct GeopeOperator *op,
                                      const double *x,
                                      double *out,
                                      size_t len);

// # Safety
// `op` must be null or a handle from [`geope_operator_new`] not yet freed.
void geope_operator_free(struct GeopeOperator *op);

// Caches relative rotations for every displacement of an `height × width`
// grid.
//
// # Safety
// `schedule` must be readable and `out` valid for writes. On success `*out`
// owns a handle to release with [`geope_table_free`].
enum GeopeStatus geope_table_new(const struct GeopeSchedule *schedule,
                                 size_t height,
                                 size_t width,
                                 struct GeopeDisplacementTable **out);

// Number of cached displacements, or 0 for a null handle.
//
// # Safety
// `table` must be null or a live handle.
size_t geope_table_len(const struct GeopeDisplacementTable *table);

// Raw relative score of a query at `(q_h, q_w)` and a key at `(k_h, k_w)`.
// Displacements outside the grid give `GEOPE_STATUS_INDEX_OUT_OF_RANGE`.
//
// # Safety
// `table` must be a live handle, `q` and `k` readable for `len` doubles and
// `out` writable.
enum GeopeStatus geope_table_score(const struct GeopeDisplacementTable *table,
                                   int64_t q_h,
                                   int64_t q_w,
                                   int64_t k_h,
                                   int64_t k_w,
                                   const double *q,
                                   const double *k,
                                   size_t len,
                                   double *out);

// # Safety
// `table` must be null or a handle from [`geope_table_new`] not yet freed.
void geope_table_free(struct GeopeDisplacementTable *table);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GEOPE_H */
