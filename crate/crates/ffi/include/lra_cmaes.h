#ifndef LRA_CMAES_H
#define LRA_CMAES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LraStatus {
  LRA_STATUS_OK = 0,
  LRA_STATUS_NULL_POINTER = 1,
  LRA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * `tell` without a pending `ask`, or a buffer of the wrong length.
   */
  LRA_STATUS_WRONG_STATE = 3,
  /**
   * An objective value was NaN.
   */
  LRA_STATUS_OBJECTIVE_NAN = 4,
  /**
   * The search distribution degenerated; the handle keeps its last valid state.
   */
  LRA_STATUS_NUMERICAL = 5,
  LRA_STATUS_PANIC = 6,
} LraStatus;

/**
 * Opaque optimizer state.
 */
typedef struct LraOptimizer LraOptimizer;

/**
 * Construction options; obtain defaults from [`lra_options_default`].
 */
typedef struct LraOptions {
  /**
   * Population size; 0 selects `4 + floor(3 ln d)`.
   */
  size_t lambda;
  /**
   * Nonzero: adapt the learning rates. Zero: keep `eta_m`, `eta_sigma` fixed.
   */
  int32_t adaptive;
  double eta_m;
  double eta_sigma;
  double alpha;
  double beta_m;
  double beta_sigma;
  double gamma;
  uint64_t seed;
} LraOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct LraOptions lra_options_default(void);

/**
 * Creates an optimizer with initial mean `mean[0..dim]`, step-size `sigma`
 * and identity covariance. `opts` may be null for defaults.
 *
 * # Safety
 * `mean` must point to `dim` readable doubles, `opts` must be null or valid,
 * and `out` must be a valid pointer to write the handle to.
 */
enum LraStatus lra_optimizer_new(size_t dim,
                                 const double *mean,
                                 double sigma,
                                 const struct LraOptions *opts,
                                 struct LraOptimizer **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `opt` must be null or a handle from [`lra_optimizer_new`] not yet freed.
 */
void lra_optimizer_free(struct LraOptimizer *opt);

/**
 * Samples a new population into `out` (`lambda * dim` doubles, row-major).
 * Asking again before `tell` discards the previous population.
 *
 * # Safety
 * `opt` must be a live handle and `out` must point to `len` writable doubles.
 */
enum LraStatus lra_optimizer_ask(struct LraOptimizer *opt, double *out, size_t len);

/**
 * Reports objective values for the last asked population, in ask order.
 *
 * # Safety
 * `opt` must be a live handle and `f` must point to `len` readable doubles.
 */
enum LraStatus lra_optimizer_tell(struct LraOptimizer *opt, const double *f, size_t len);

/**
 * Copies the current mean into `out` (`dim` doubles).
 *
 * # Safety
 * `opt` must be a live handle and `out` must point to `len` writable doubles.
 */
enum LraStatus lra_optimizer_mean(const struct LraOptimizer *opt, double *out, size_t len);

/**
 * Current learning rates for the mean and the covariance.
 *
 * # Safety
 * `opt` must be a live handle; output pointers must be valid.
 */
enum LraStatus lra_optimizer_eta(const struct LraOptimizer *opt, double *eta_m, double *eta_sigma);

/**
 * Step-size; NaN for a null handle.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
double lra_optimizer_sigma(const struct LraOptimizer *opt);

/**
 * Population size; 0 for a null handle.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
size_t lra_optimizer_lambda(const struct LraOptimizer *opt);

/**
 * Search-space dimension; 0 for a null handle.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
size_t lra_optimizer_dim(const struct LraOptimizer *opt);

/**
 * Completed iterations; 0 for a null handle.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
uint64_t lra_optimizer_iteration(const struct LraOptimizer *opt);

/**
 * Noiseless value of a named benchmark function (e.g. `"rastrigin"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string, `x` must point to `dim` doubles and
 * `out` must be writable.
 */
enum LraStatus lra_objective_evaluate(const char *name, const double *x, size_t dim, double *out);

/**
 * Euler-integrates the 1-D Rastrigin mean/variance dynamics for at most
 * `steps` steps and writes the final state. Returns `Numerical` (with the
 * last valid state written) if the variance became nonpositive.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum LraStatus lra_ode_euler(double m0,
                             double v0,
                             double eta,
                             uint64_t steps,
                             double *m_out,
                             double *v_out,
                             uint64_t *steps_out);

/**
 * Copies the calling thread's last error message (NUL-terminated, truncated
 * to fit) into `buf` and returns the full message length in bytes.
 * Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t lra_last_error_message(char *buf, size_t cap);

/**
 * Static description of a status code.
 */
const char *lra_status_string(enum LraStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LRA_CMAES_H */
