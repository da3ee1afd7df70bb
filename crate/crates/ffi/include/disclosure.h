#ifndef DISCLOSURE_H
#define DISCLOSURE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum DscStatus {
  DSC_STATUS_OK = 0,
  DSC_STATUS_NULL_POINTER = 1,
  DSC_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or invalid input values.
   */
  DSC_STATUS_CONFIG = 3,
  /**
   * The primitives violate a model assumption.
   */
  DSC_STATUS_MODEL = 4,
  DSC_STATUS_SOLVER = 5,
  /**
   * A caller-supplied buffer has the wrong length.
   */
  DSC_STATUS_BUFFER_SIZE = 6,
  DSC_STATUS_PANIC = 7,
} DscStatus;

/**
 * A discrete breakthrough-time distribution.
 */
typedef struct DscDist DscDist;

/**
 * A technology pair with its structural constants.
 */
typedef struct DscPair DscPair;

typedef struct DscConstants {
  double u0;
  double u1;
  double u_star;
  double alpha;
  double affine_gap;
  double t_underline;
} DscConstants;

typedef struct DscDeadline {
  /**
   * Optimal deadline; `INFINITY` when disclosure is never rewarded below u0.
   */
  double t_star;
  double t_underline;
  double pi;
  bool foc_satisfied;
  /**
   * Set when the optimizer fell back to `T = INFINITY`.
   */
  bool anomaly;
} DscDeadline;

typedef struct DscEuler {
  double lambda_star;
  double payoff;
  double x0;
  double residual_max;
  size_t roots;
} DscEuler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL.
 * The pointer stays valid until the next call into this library.
 */
const char *dsc_last_error(void);

/**
 * Library version as a static string.
 */
const char *dsc_version(void);

/**
 * Builds a technology pair from JSON: either a bare technology object or
 * `{"technology": ..., "r": ...}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DscStatus dsc_pair_from_json(const char *json, struct DscPair **out);

/**
 * # Safety
 * `pair` must come from [`dsc_pair_from_json`] and not be freed twice.
 */
void dsc_pair_free(struct DscPair *pair);

/**
 * # Safety
 * `pair` must be a live handle and `out` a valid pointer.
 */
enum DscStatus dsc_pair_constants(const struct DscPair *pair, struct DscConstants *out);

/**
 * Builds a distribution from `{"atoms": [[t, p], ...]}` or
 * `{"family": {"kind": ...}, "m": n}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DscStatus dsc_dist_from_json(const char *json, struct DscDist **out);

/**
 * # Safety
 * `dist` must come from [`dsc_dist_from_json`] and not be freed twice.
 */
void dsc_dist_free(struct DscDist *dist);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `dist` must be null or a live handle.
 */
size_t dsc_dist_len(const struct DscDist *dist);

/**
 * Optimal deadline mechanism.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum DscStatus dsc_optimize_deadline(const struct DscPair *pair,
                                     const struct DscDist *dist,
                                     double tol,
                                     struct DscDeadline *out);

/**
 * Principal payoff of the deadline mechanism with deadline `t`
 * (`INFINITY` for never).
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum DscStatus dsc_deadline_payoff(const struct DscPair *pair,
                                   const struct DscDist *dist,
                                   double t,
                                   double *out);

/**
 * Solves the Euler system for a simple pair. `levels` and `rewards` may be
 * NULL; otherwise each must hold `len == dsc_dist_len(dist)` doubles and
 * receives u_k and X_k per atom.
 *
 * # Safety
 * Handles must be live, `out` valid, and non-null buffers hold `len` doubles.
 */
enum DscStatus dsc_solve_euler(const struct DscPair *pair,
                               const struct DscDist *dist,
                               struct DscEuler *out,
                               double *levels,
                               double *rewards,
                               size_t len);

/**
 * Runs a full CLI configuration and returns `report.json` as a string to
 * release with [`dsc_string_free`]. Model and solver failures still produce
 * a report; the status says which.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `report` a valid pointer.
 */
enum DscStatus dsc_run_config(const char *config_json, char **report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void dsc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCLOSURE_H */
