#ifndef FCTN_HSR_H
#define FCTN_HSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FhStatus {
  FH_STATUS_OK = 0,
  FH_STATUS_NULL_POINTER = 1,
  FH_STATUS_INVALID_UTF8 = 2,
  FH_STATUS_SHAPE = 3,
  FH_STATUS_INVALID_ARGUMENT = 4,
  FH_STATUS_NUMERIC = 5,
  FH_STATUS_CONFIG = 6,
  FH_STATUS_IO = 7,
  FH_STATUS_PANIC = 8,
} FhStatus;

/**
 * Fusion settings handle.
 */
typedef struct FhConfig FhConfig;

/**
 * Dense tensor handle.
 */
typedef struct FhTensor FhTensor;

/**
 * Quality of an estimate against a reference cube.
 */
typedef struct FhMetrics {
  double psnr_db;
  double sam_deg;
  double ergas;
  double uiqi;
} FhMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fh_version(void);

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *fh_last_error(void);

/**
 * Creates a tensor by copying `product(shape)` column-major values.
 *
 * # Safety
 * `shape` must point to `order` readable values and `data` to
 * `product(shape)` readable doubles (either may be null when the count is
 * zero). `out` must be writable.
 */
enum FhStatus fh_tensor_new(const size_t *shape,
                            size_t order,
                            const double *data,
                            struct FhTensor **out);

/**
 * Releases a tensor; null is ignored.
 *
 * # Safety
 * `t` must come from this library and not have been freed.
 */
void fh_tensor_free(struct FhTensor *t);

/**
 * Number of modes, or 0 for null.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t fh_tensor_order(const struct FhTensor *t);

/**
 * Number of elements, or 0 for null.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t fh_tensor_len(const struct FhTensor *t);

/**
 * Copies the extents into `out`, which holds `capacity` values.
 *
 * # Safety
 * `t` must be a live tensor handle and `out` must hold `capacity` writable values.
 */
enum FhStatus fh_tensor_shape(const struct FhTensor *t, size_t *out, size_t capacity);

/**
 * Read-only view of the column-major values, valid while the handle lives.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
const double *fh_tensor_data(const struct FhTensor *t);

/**
 * Reads a float64 NPY file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum FhStatus fh_npy_load(const char *path, struct FhTensor **out);

/**
 * Writes a tensor as a Fortran-order float64 NPY file.
 *
 * # Safety
 * `t` must be a live tensor handle and `path` a NUL-terminated string.
 */
enum FhStatus fh_npy_save(const struct FhTensor *t, const char *path);

/**
 * Spectral response with Gaussian rows, `msi_bands × bands`, rows summing to one.
 *
 * # Safety
 * `out` must be writable.
 */
enum FhStatus fh_gaussian_srf(size_t msi_bands, size_t bands, struct FhTensor **out);

/**
 * Simulates a low-resolution HSI (block mean over `p×p`) and an MSI
 * (spectral response) from an `M×N×S` reference. Pass `INFINITY` as an
 * SNR for a noiseless observation; the MSI noise uses `noise_seed + 1`.
 *
 * # Safety
 * `reference` and `srf` must be live tensor handles; `out_hsi` and
 * `out_msi` must be writable.
 */
enum FhStatus fh_degrade(const struct FhTensor *reference,
                         const struct FhTensor *srf,
                         size_t p,
                         double snr_hsi_db,
                         double snr_msi_db,
                         uint64_t noise_seed,
                         struct FhTensor **out_hsi,
                         struct FhTensor **out_msi);

/**
 * Fusion settings for a tensorization plan such as `"8x8,5x5,2x2,3x3"` and
 * the upper-triangle bond ranks `r12, r13, ..., r23, ...` of its
 * `scales + 1` factors. Other settings take their defaults.
 *
 * # Safety
 * `plan` must be a NUL-terminated string, `ranks` must point to
 * `rank_count` values, and `out` must be writable.
 */
enum FhStatus fh_config_new(const char *plan,
                            const size_t *ranks,
                            size_t rank_count,
                            struct FhConfig **out);

/**
 * Releases a config; null is ignored.
 *
 * # Safety
 * `c` must come from this library and not have been freed.
 */
void fh_config_free(struct FhConfig *c);

/**
 * Sets the MSI weight `lambda`, the ridge weight `mu` and the band-graph weight `beta`.
 * The config is left unchanged when a value is rejected.
 *
 * # Safety
 * `c` must be a live config handle.
 */
enum FhStatus fh_config_set_weights(struct FhConfig *c, double lambda, double mu, double beta);

/**
 * Sets the band-graph bandwidth and neighbourhood half-width.
 *
 * # Safety
 * `c` must be a live config handle.
 */
enum FhStatus fh_config_set_graph(struct FhConfig *c, double sigma, size_t half_width);

/**
 * Sets the sweep count and the initialization seed.
 *
 * # Safety
 * `c` must be a live config handle.
 */
enum FhStatus fh_config_set_iterations(struct FhConfig *c, size_t max_iter, uint64_t seed);

/**
 * Fuses an `m×n×S` HSI and an `M×N×s` MSI with an `s×S` spectral response
 * into an `M×N×S` estimate. `out_iterations` may be null.
 *
 * # Safety
 * All handles must be live; `out_estimate` must be writable and
 * `out_iterations` null or writable.
 */
enum FhStatus fh_fuse(const struct FhTensor *hsi,
                      const struct FhTensor *msi,
                      const struct FhTensor *srf,
                      const struct FhConfig *config,
                      struct FhTensor **out_estimate,
                      size_t *out_iterations);

/**
 * PSNR (dB), SAM (degrees), ERGAS at resolution ratio `p`, and UIQI of
 * `estimate` against `reference`.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum FhStatus fh_metrics(const struct FhTensor *reference,
                         const struct FhTensor *estimate,
                         double p,
                         struct FhMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FCTN_HSR_H */
