#ifndef NEWTON_INFER_H
#define NEWTON_INFER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  NI_STATUS_OK = 0,
  NI_STATUS_NULL_POINTER = 1,
  NI_STATUS_USAGE = 2,
  NI_STATUS_CONFIG = 3,
  NI_STATUS_NUMERIC = 4,
  NI_STATUS_LINEAR_ALGEBRA = 5,
  NI_STATUS_DIVERGENCE = 6,
  NI_STATUS_PARTIAL_FAILURE = 7,
  NI_STATUS_IO = 8,
  /**
   * Output buffer has the wrong length.
   */
  NI_STATUS_BUFFER_SIZE = 9,
  /**
   * The requested quantity does not exist for this result.
   */
  NI_STATUS_UNAVAILABLE = 10,
  NI_STATUS_PANIC = 11,
} NiStatus;

/**
 * Dataset handle.
 */
typedef struct NiDataset NiDataset;

/**
 * Inference result handle.
 */
typedef struct NiResult NiResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the calling thread's last failure, or NULL. Valid until the
 * thread's next failing call.
 */
const char *ni_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ni_version(void);

/**
 * Copy an `n × p` row-major design and `n` responses into a new dataset.
 *
 * # Safety
 * `x` must point to `n * p` doubles, `y` to `n` doubles and `out` to a
 * writable handle slot.
 */
NiStatus ni_dataset_new(const double *x, const double *y, size_t n, size_t p, NiDataset **out);

/**
 * Generate the data set of a named preset (`lin1`, `tsma`, ...); the same
 * seed gives the same data as the command line's `--seed`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable handle slot.
 */
NiStatus ni_dataset_from_preset(const char *name, uint64_t seed, NiDataset **out);

/**
 * # Safety
 * `d` must be NULL or a handle from this library that is not used afterwards.
 */
void ni_dataset_free(NiDataset *d);

/**
 * Sample count, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t ni_dataset_n(const NiDataset *d);

/**
 * Feature count, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t ni_dataset_p(const NiDataset *d);

/**
 * Run inference on `data`. `config_json` (may be NULL) uses the command
 * line's JSON config schema; its `preset` supplies the defaults and the
 * loss (`lin1` when absent).
 *
 * # Safety
 * `data` must be a live handle, `config_json` NULL or NUL-terminated, and
 * `out` a writable handle slot.
 */
NiStatus ni_infer(const NiDataset *data, const char *config_json, NiResult **out);

/**
 * # Safety
 * `r` must be NULL or a handle from this library that is not used afterwards.
 */
void ni_result_free(NiResult *r);

/**
 * Dimension of the estimate, or 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t ni_result_p(const NiResult *r);

/**
 * Interval centres (the point estimate); `len` must equal p.
 *
 * # Safety
 * `r` must be a live handle and `out` point to `len` writable doubles.
 */
NiStatus ni_result_estimate(const NiResult *r, double *out, size_t len);

/**
 * Lower and upper interval ends; each buffer holds p values.
 *
 * # Safety
 * `r` must be a live handle; `lower` and `upper` point to `len` writable doubles.
 */
NiStatus ni_result_intervals(const NiResult *r, double *lower, double *upper, size_t len);

/**
 * Row-major `p × p` covariance of `√n(θ̂ − θ*)`; [`NiStatus::Unavailable`]
 * for high-dimensional results.
 *
 * # Safety
 * `r` must be a live handle and `out` point to `len` writable doubles.
 */
NiStatus ni_result_covariance(const NiResult *r, double *out, size_t len);

/**
 * Two-sided p-values for `θ_j = 0`; `len` must equal p.
 *
 * # Safety
 * `r` must be a live handle and `out` point to `len` writable doubles.
 */
NiStatus ni_result_pvalues(const NiResult *r, double *out, size_t len);

/**
 * Coverage simulation with a JSON config (NULL: the `lin1` preset) on
 * `threads` workers (0: all cores).
 *
 * # Safety
 * `config_json` must be NULL or NUL-terminated; the three outputs must be
 * writable.
 */
NiStatus ni_coverage(const char *config_json,
                     uint64_t seed,
                     size_t threads,
                     double *coverage,
                     double *avg_length,
                     size_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEWTON_INFER_H */
