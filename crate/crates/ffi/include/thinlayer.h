#ifndef THINLAYER_H
#define THINLAYER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_INVALID_ARGUMENT = 2,
  TL_STATUS_CONFIG = 3,
  TL_STATUS_NUMERICAL = 4,
  TL_STATUS_IO = 5,
  TL_STATUS_BUFFER_TOO_SMALL = 6,
  TL_STATUS_PANIC = 7,
} TlStatus;

typedef enum TlHoleKind {
  TL_HOLE_KIND_NONE = 0,
  TL_HOLE_KIND_ELLIPSOID = 1,
  TL_HOLE_KIND_BOX = 2,
} TlHoleKind;

typedef enum TlNormalization {
  TL_NORMALIZATION_VOLUME_NORMALIZED = 0,
  TL_NORMALIZATION_UNNORMALIZED = 1,
} TlNormalization;

/**
 * Which effective coefficient block to copy.
 */
typedef enum TlTensor {
  /**
   * In-plane membrane tensor A*.
   */
  TL_TENSOR_A_STAR = 0,
  TL_TENSOR_A_PLATE = 1,
  TL_TENSOR_B_PLATE = 2,
  TL_TENSOR_C_PLATE = 3,
} TlTensor;

/**
 * Reference cell with its assembled operators.
 */
typedef struct TlCell TlCell;

typedef struct TlCoefficients TlCoefficients;

typedef struct TlReport TlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tl_version(void);

/**
 * Copies the last error of this thread into `buf` (NUL-terminated) and returns its length
 * without the terminator; 0 when there is no error. With `cap` too small nothing is copied.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t tl_last_error_message(char *buf, size_t cap);

/**
 * Builds a cell of dimension 2 or 3 with an isotropic material. `center` and `half` hold
 * `dimension` values each and may be null for `TL_HOLE_KIND_NONE`.
 *
 * # Safety
 * `center` and `half` must be null or point to `dimension` readable doubles; `out` must be
 * a valid pointer.
 */
enum TlStatus tl_cell_new(size_t dimension,
                          size_t resolution,
                          enum TlHoleKind hole,
                          const double *center,
                          const double *half,
                          double lambda,
                          double mu,
                          double rho,
                          struct TlCell **out);

/**
 * # Safety
 * `cell` must be null or a handle from [`tl_cell_new`] not yet freed.
 */
void tl_cell_free(struct TlCell *cell);

/**
 * Number of removed voxels and the solid measure |Y₀|.
 *
 * # Safety
 * `cell` must be a live handle; the output pointers must be valid.
 */
enum TlStatus tl_cell_stats(const struct TlCell *cell, size_t *removed, double *measure);

/**
 * Solves the static cell problems and assembles the effective coefficients.
 *
 * # Safety
 * `cell` must be a live handle and `out` a valid pointer.
 */
enum TlStatus tl_cell_coefficients(const struct TlCell *cell,
                                   enum TlNormalization normalization,
                                   struct TlCoefficients **out);

/**
 * # Safety
 * `coeffs` must be null or a handle from [`tl_cell_coefficients`] not yet freed.
 */
void tl_coefficients_free(struct TlCoefficients *coeffs);

/**
 * Copies a Voigt block row-major into `buf`. `rows` and `cols` always receive the shape;
 * returns `TL_STATUS_BUFFER_TOO_SMALL` when `cap < rows * cols`.
 *
 * # Safety
 * `coeffs` must be a live handle; `buf` must point to `cap` writable doubles (or be null
 * with `cap = 0`); `rows` and `cols` must be valid.
 */
enum TlStatus tl_coefficients_matrix(const struct TlCoefficients *coeffs,
                                     enum TlTensor which,
                                     double *buf,
                                     size_t cap,
                                     size_t *rows,
                                     size_t *cols);

/**
 * Effective interface density ρ̄.
 *
 * # Safety
 * `coeffs` must be a live handle and `out` valid.
 */
enum TlStatus tl_coefficients_rho_bar(const struct TlCoefficients *coeffs, double *out);

/**
 * Runs every stage present in the JSON config at `path`. When `out_dir` is non-null the CSV
 * bundle and summary are written there.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out_dir` null or NUL-terminated, `out` valid.
 */
enum TlStatus tl_run_config(const char *path, const char *out_dir, struct TlReport **out);

/**
 * Same as [`tl_run_config`] with the config given as a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string, `out_dir` null or NUL-terminated, `out` valid.
 */
enum TlStatus tl_run_config_json(const char *json, const char *out_dir, struct TlReport **out);

/**
 * # Safety
 * `report` must be null or a handle from a run function not yet freed.
 */
void tl_report_free(struct TlReport *report);

/**
 * Invariant ledger size and number of failed entries.
 *
 * # Safety
 * `report` must be a live handle; outputs valid.
 */
enum TlStatus tl_report_invariants(const struct TlReport *report, size_t *total, size_t *failed);

/**
 * Number of ε-ladder rows; `bulk_l2` (capacity `cap`) receives the bulk errors in ladder order.
 *
 * # Safety
 * `report` must be a live handle; `bulk_l2` null or `cap` writable doubles; `rows` valid.
 */
enum TlStatus tl_report_ladder(const struct TlReport *report,
                               double *bulk_l2,
                               size_t cap,
                               size_t *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THINLAYER_H */
