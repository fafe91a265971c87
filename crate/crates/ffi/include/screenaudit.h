/* C interface to the screenaudit library. Generated by cbindgen; do not edit. */

#ifndef SCREENAUDIT_H
#define SCREENAUDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function in this library.
typedef enum SaStatus {
  // Success; all out-pointers are filled.
  SA_STATUS_OK = 0,
  // A required pointer argument was null.
  SA_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SA_STATUS_INVALID_UTF8 = 2,
  // File could not be read or written.
  SA_STATUS_IO = 3,
  // Input file or field failed to parse.
  SA_STATUS_PARSE = 4,
  // An argument or configuration value is out of range.
  SA_STATUS_INVALID_INPUT = 5,
  // No data left to operate on.
  SA_STATUS_EMPTY_INPUT = 6,
  // A record lacks a value the operation needs.
  SA_STATUS_MISSING_VALUE = 7,
  // A calibration target cannot be reached.
  SA_STATUS_INFEASIBLE = 8,
  // Internal panic caught at the FFI boundary.
  SA_STATUS_PANIC = 9,
} SaStatus;

// Opaque handle to a loaded, binarized application dataset.
typedef struct SaDataset SaDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string. Never freed.
const char *sa_version(void);

// Message for the most recent failure on this thread, or null if the
// last call succeeded. The pointer is valid until the next fallible call
// on the same thread; do not free it.
const char *sa_last_error(void);

// Release a string returned through a `char*` out-pointer. Null is a
// safe no-op.
//
// # Safety
// `s` must be a pointer previously returned by this library through an
// out-parameter, and must not be used after this call.
void sa_string_free(char *s);

// Load an applications CSV (canonical column names), binarize scores at
// `threshold`, and return a dataset handle through `out_dataset`.
//
// # Safety
// `path` must be a NUL-terminated string and `out_dataset` a valid
// pointer. On success the handle must be released with
// [`sa_dataset_free`].
enum SaStatus sa_dataset_load(const char *path, double threshold, struct SaDataset **out_dataset);

// Release a dataset handle. Null is a safe no-op.
//
// # Safety
// `dataset` must be a handle from [`sa_dataset_load`] that has not
// already been freed.
void sa_dataset_free(struct SaDataset *dataset);

// Number of application records in the dataset.
//
// # Safety
// `dataset` must be a live handle from [`sa_dataset_load`]; null yields 0.
size_t sa_dataset_len(const struct SaDataset *dataset);

// Number of distinct applicants in the dataset.
//
// # Safety
// `dataset` must be a live handle from [`sa_dataset_load`]; null yields 0.
size_t sa_dataset_n_applicants(const struct SaDataset *dataset);

// Run the per-position adverse-impact audit and aggregate rollups on a
// loaded dataset.
//
// `group_column` names the demographic column ("race", "gender", or an
// extra column); `alpha` is the significance level shared by the z-gate
// and the Benjamini–Hochberg correction; `four_fifths` is the practical
// impact-ratio gate; `min_reporting` is the distinct-applicant floor for
// an eligible position. The full report (per-position rows plus
// aggregate and occupation rollups) is returned as a JSON document
// through `out_json`; free it with [`sa_string_free`].
//
// # Safety
// `dataset` must be a live handle, `group_column` a NUL-terminated
// string, and `out_json` a valid pointer.
enum SaStatus sa_audit_run(const struct SaDataset *dataset,
                           const char *group_column,
                           double alpha,
                           double four_fifths,
                           uint64_t min_reporting,
                           char **out_json);

// Exact Poisson-binomial PMF over `len` independent trials.
//
// `probs` holds `len` success probabilities in [0, 1]; `out_pmf` must
// have room for `len + 1` values and receives P(0 successes) through
// P(`len` successes).
//
// # Safety
// `probs` must point to `len` readable doubles and `out_pmf` to
// `len + 1` writable doubles.
enum SaStatus sa_poisson_binomial(const double *probs, size_t len, double *out_pmf);

// Two-sample pooled-proportion z-test of `rate_a` (on `n_a` trials)
// against `rate_b` (on `n_b` trials).
//
// Writes the signed statistic to `out_z` and the lower-tail p-value
// Φ(z) to `out_p`. A degenerate pool (pooled rate 0 or 1) yields z = 0,
// p = 0.5.
//
// # Safety
// `out_z` and `out_p` must be valid pointers.
enum SaStatus sa_pooled_z_test(double rate_a,
                               uint64_t n_a,
                               double rate_b,
                               uint64_t n_b,
                               double *out_z,
                               double *out_p);

// Benjamini–Hochberg step-up over `len` p-values at level `alpha`.
//
// `out_rejected` must have room for `len` bytes and receives 1 where the
// hypothesis is rejected, 0 otherwise, aligned with the input order.
// `out_n_rejected` (nullable) receives the rejection count.
//
// # Safety
// `p_values` must point to `len` readable doubles and `out_rejected` to
// `len` writable bytes; `out_n_rejected` may be null.
enum SaStatus sa_benjamini_hochberg(const double *p_values,
                                    size_t len,
                                    double alpha,
                                    uint8_t *out_rejected,
                                    size_t *out_n_rejected);

// Least-squares exponential decay fit y ≈ a·e^(b·x) over `len` points.
//
// Points with y ≤ 0 are dropped (their logarithm is undefined); at
// least two usable points with distinct x are required. Writes the
// multiplier to `out_a`, the decay rate to `out_b`, and the log-space
// coefficient of determination to `out_r_squared` (nullable).
//
// # Safety
// `xs` and `ys` must each point to `len` readable doubles; `out_a` and
// `out_b` must be valid pointers; `out_r_squared` may be null.
enum SaStatus sa_fit_exponential(const double *xs,
                                 const double *ys,
                                 size_t len,
                                 double *out_a,
                                 double *out_b,
                                 double *out_r_squared);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCREENAUDIT_H */
