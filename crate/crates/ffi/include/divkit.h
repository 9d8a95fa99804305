#ifndef DIVKIT_H
#define DIVKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `DIVKIT_STATUS_OK` is zero; everything else is an error.
 */
typedef enum DivkitStatus {
  DIVKIT_STATUS_OK = 0,
  DIVKIT_STATUS_NULL_POINTER = 1,
  DIVKIT_STATUS_INVALID_INPUT = 2,
  DIVKIT_STATUS_DIMENSION_MISMATCH = 3,
  DIVKIT_STATUS_SINGULAR_PAIR = 4,
  DIVKIT_STATUS_MOMENT_MISMATCH = 5,
  DIVKIT_STATUS_DEGENERATE_COVARIANCE = 6,
  DIVKIT_STATUS_INADMISSIBLE = 7,
  DIVKIT_STATUS_NOT_NORMALIZED = 8,
  DIVKIT_STATUS_SUPPORT_VIOLATION = 9,
  DIVKIT_STATUS_TOO_LARGE = 10,
  DIVKIT_STATUS_DEGENERATE_BASIS = 11,
  DIVKIT_STATUS_NUMERICAL = 12,
  DIVKIT_STATUS_IO = 13,
  DIVKIT_STATUS_CSV = 14,
  DIVKIT_STATUS_JSON = 15,
  DIVKIT_STATUS_BUFFER_TOO_SMALL = 16,
  DIVKIT_STATUS_PANIC = 99,
} DivkitStatus;

/**
 * Divergence family tag of a [`DivkitReport`].
 */
typedef enum DivkitFamily {
  DIVKIT_FAMILY_ENERGY = 0,
  DIVKIT_FAMILY_FOURIER = 1,
  DIVKIT_FAMILY_WASSERSTEIN = 2,
  DIVKIT_FAMILY_KL = 3,
  DIVKIT_FAMILY_FISHER = 4,
  DIVKIT_FAMILY_CRAMER = 5,
  DIVKIT_FAMILY_GINI_FAMILY = 6,
} DivkitFamily;

typedef enum DivkitWhiteningMethod {
  DIVKIT_WHITENING_METHOD_CHOLESKY = 0,
  DIVKIT_WHITENING_METHOD_ZCA_COR = 1,
} DivkitWhiteningMethod;

/**
 * Opaque weighted sample set.
 */
typedef struct DivkitSampleSet DivkitSampleSet;

/**
 * Opaque whitening map.
 */
typedef struct DivkitWhiteningMap DivkitWhiteningMap;

/**
 * Plain-data view of a divergence report (diagnostics are not exported).
 */
typedef struct DivkitReport {
  enum DivkitFamily family;
  double order;
  double value;
  double error_estimate;
} DivkitReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *divkit_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t divkit_last_error_message(char *buf, size_t len);

/**
 * Builds a sample set from `n_points × dim` row-major coordinates and
 * optional weights (null for uniform).
 *
 * # Safety
 * `coords` must hold `n_points * dim` values; `weights` must be null or
 * hold `n_points` values; `out` must be valid for writes.
 */
enum DivkitStatus divkit_sample_set_new(const double *coords,
                                        size_t n_points,
                                        size_t dim,
                                        const double *weights,
                                        struct DivkitSampleSet **out);

/**
 * Loads a CSV sample file (header line; optional weight column name).
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `weight_column` null or
 * NUL-terminated; `out` valid for writes.
 */
enum DivkitStatus divkit_sample_set_load_csv(const char *path,
                                             const char *weight_column,
                                             struct DivkitSampleSet **out);

/**
 * # Safety
 * `set` must be null or a handle from this library not yet freed.
 */
void divkit_sample_set_free(struct DivkitSampleSet *set);

/**
 * Number of points, 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t divkit_sample_set_len(const struct DivkitSampleSet *set);

/**
 * Dimension, 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t divkit_sample_set_dim(const struct DivkitSampleSet *set);

/**
 * Copies the coordinates (row-major) into `buf` of `len` doubles.
 *
 * # Safety
 * `set` a live handle, `buf` valid for `len` writes.
 */
enum DivkitStatus divkit_sample_set_coords(const struct DivkitSampleSet *set,
                                           double *buf,
                                           size_t len);

/**
 * Euclidean Energy distance energy_sq of order `alpha`.
 *
 * # Safety
 * Handles live, `out` valid for writes.
 */
enum DivkitStatus divkit_energy(const struct DivkitSampleSet *mu,
                                const struct DivkitSampleSet *nu,
                                double alpha,
                                struct DivkitReport *out);

/**
 * Fourier-based metric F_s with default quadrature.
 *
 * # Safety
 * Handles live, `out` valid for writes.
 */
enum DivkitStatus divkit_fourier(const struct DivkitSampleSet *mu,
                                 const struct DivkitSampleSet *nu,
                                 double s,
                                 struct DivkitReport *out);

/**
 * Wasserstein W_p (quantile coupling in 1-D, transportation simplex otherwise).
 *
 * # Safety
 * Handles live, `out` valid for writes.
 */
enum DivkitStatus divkit_wasserstein(const struct DivkitSampleSet *mu,
                                     const struct DivkitSampleSet *nu,
                                     double p,
                                     struct DivkitReport *out);

/**
 * Energy distance between the separately whitened samples; `whitening`
 * is a `DivkitWhiteningMethod` value.
 *
 * # Safety
 * Handles live, `out` valid for writes.
 */
enum DivkitStatus divkit_whitened_energy(const struct DivkitSampleSet *mu,
                                         const struct DivkitSampleSet *nu,
                                         double alpha,
                                         int32_t whitening,
                                         struct DivkitReport *out);

/**
 * Fits a whitening map on `mu` (ridge 0 for none); `whitening` is a
 * `DivkitWhiteningMethod` value.
 *
 * # Safety
 * `mu` live, `out` valid for writes.
 */
enum DivkitStatus divkit_whitening_fit(const struct DivkitSampleSet *mu,
                                       int32_t whitening,
                                       double ridge,
                                       struct DivkitWhiteningMap **out);

/**
 * Copies the row-major whitening matrix into `buf` of `len` doubles.
 *
 * # Safety
 * `map` live, `buf` valid for `len` writes.
 */
enum DivkitStatus divkit_whitening_matrix(const struct DivkitWhiteningMap *map,
                                          double *buf,
                                          size_t len);

/**
 * Applies the map to every point of `mu`, producing a new handle.
 *
 * # Safety
 * Handles live, `out` valid for writes.
 */
enum DivkitStatus divkit_whitening_apply(const struct DivkitWhiteningMap *map,
                                         const struct DivkitSampleSet *mu,
                                         struct DivkitSampleSet **out);

/**
 * # Safety
 * `map` must be null or a live handle.
 */
void divkit_whitening_free(struct DivkitWhiteningMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVKIT_H */
