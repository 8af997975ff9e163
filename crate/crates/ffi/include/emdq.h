#ifndef EMDQ_H
#define EMDQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmdqSolver {
  EMDQ_SOLVER_EXACT = 0,
  EMDQ_SOLVER_SINKHORN = 1,
} EmdqSolver;

// Result code of every fallible call.
typedef enum EmdqStatus {
  EMDQ_STATUS_OK = 0,
  EMDQ_STATUS_NULL_POINTER = 1,
  EMDQ_STATUS_INVALID_ARGUMENT = 2,
  EMDQ_STATUS_DIMENSION_MISMATCH = 3,
  EMDQ_STATUS_IMBALANCE = 4,
  EMDQ_STATUS_SOLVER_FAILURE = 5,
  EMDQ_STATUS_TOO_LARGE = 6,
  EMDQ_STATUS_PANIC = 7,
} EmdqStatus;

typedef enum EmdqVerdict {
  // EMD is above the threshold.
  EMDQ_VERDICT_CASE1 = 1,
  // EMD is below the threshold.
  EMDQ_VERDICT_CASE2 = 2,
  // EMD is within `epsilon * delta_tilde` of the threshold.
  EMDQ_VERDICT_CASE3 = 3,
} EmdqVerdict;

// Opaque query result.
typedef struct EmdqOutcome EmdqOutcome;

// Opaque weighted point set.
typedef struct EmdqPointSet EmdqPointSet;

// Query settings. Obtain defaults from [`emdq_query_options_default`].
typedef struct EmdqQueryOptions {
  double threshold;
  double epsilon;
  // One of the `EmdqSolver` values.
  uint32_t solver;
  // Sinkhorn regularization as a multiple of the largest distance.
  double eta_factor;
  size_t max_iter;
  double tol;
  // Doubling dimension for fixed-round splitting; 0 selects adaptive.
  uint32_t rho;
} EmdqQueryOptions;

// One level of a query trace.
typedef struct EmdqLevel {
  uint32_t level;
  size_t node_count;
  size_t surplus_sources;
  size_t surplus_sinks;
  double estimate;
  double band;
  double target_radius;
  double elapsed_secs;
} EmdqLevel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a point set from `n * dim` row-major coordinates and `n` weights.
// `weights` may be null for unit weights. On success `*out` owns a new
// handle that must be released with [`emdq_point_set_free`].
//
// # Safety
// `coords` must point to `n * dim` readable doubles, `weights` (if not null)
// to `n`, and `out` must be writable.
enum EmdqStatus emdq_point_set_new(const double *coords,
                                   size_t n,
                                   size_t dim,
                                   const double *weights,
                                   struct EmdqPointSet **out);

// # Safety
// `set` is null or a handle from [`emdq_point_set_new`] not yet freed.
void emdq_point_set_free(struct EmdqPointSet *set);

// Number of points, or 0 for a null handle.
//
// # Safety
// `set` is null or a live handle.
size_t emdq_point_set_len(const struct EmdqPointSet *set);

// # Safety
// `set` is null or a live handle.
size_t emdq_point_set_dim(const struct EmdqPointSet *set);

// # Safety
// `set` is null or a live handle.
double emdq_point_set_total_weight(const struct EmdqPointSet *set);

struct EmdqQueryOptions emdq_query_options_default(void);

// Runs a threshold query. On success `*out` owns a new outcome handle that
// must be released with [`emdq_outcome_free`].
//
// # Safety
// `a` and `b` are live point-set handles, `options` points to a valid
// options record, and `out` is writable.
enum EmdqStatus emdq_query(const struct EmdqPointSet *a,
                           const struct EmdqPointSet *b,
                           const struct EmdqQueryOptions *options,
                           struct EmdqOutcome **out);

// # Safety
// `outcome` is null or a handle from [`emdq_query`] not yet freed.
void emdq_outcome_free(struct EmdqOutcome *outcome);

// # Safety
// `outcome` is a live handle.
enum EmdqStatus emdq_outcome_verdict(const struct EmdqOutcome *outcome, enum EmdqVerdict *verdict);

// `delta_tilde` of the query, or NaN for a null handle.
//
// # Safety
// `outcome` is null or a live handle.
double emdq_outcome_delta_tilde(const struct EmdqOutcome *outcome);

// # Safety
// `outcome` is null or a live handle.
uint32_t emdq_outcome_h_max(const struct EmdqOutcome *outcome);

// # Safety
// `outcome` is null or a live handle.
size_t emdq_outcome_level_count(const struct EmdqOutcome *outcome);

// Copies trace entry `index` into `*level`.
//
// # Safety
// `outcome` is a live handle and `level` is writable.
enum EmdqStatus emdq_outcome_level(const struct EmdqOutcome *outcome,
                                   size_t index,
                                   struct EmdqLevel *level);

// Exact EMD (optimal cost divided by total weight).
//
// # Safety
// `a`, `b` are live handles and `emd` is writable.
enum EmdqStatus emdq_exact_emd(const struct EmdqPointSet *a,
                               const struct EmdqPointSet *b,
                               double *emd);

// EMD of the rounded Sinkhorn plan; an upper bound on the exact value.
//
// # Safety
// `a`, `b` are live handles and `emd` is writable.
enum EmdqStatus emdq_sinkhorn_emd(const struct EmdqPointSet *a,
                                  const struct EmdqPointSet *b,
                                  double eta_factor,
                                  size_t max_iter,
                                  double tol,
                                  double *emd);

// Message for the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *emdq_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *emdq_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMDQ_H */
