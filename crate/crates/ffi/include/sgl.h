#ifndef SGL_H
#define SGL_H

#include <stdbool.h>
#include <stddef.h>

typedef enum SglRule {
  SGL_RULE_NONE = 0,
  SGL_RULE_STATIC = 1,
  SGL_RULE_DYNAMIC = 2,
  SGL_RULE_DST3 = 3,
  SGL_RULE_GAP = 4,
} SglRule;

typedef enum SglStatus {
  SGL_STATUS_OK = 0,
  SGL_STATUS_NULL_POINTER = 1,
  SGL_STATUS_INVALID_ARGUMENT = 2,
  SGL_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * The solver stopped at `max_passes` above the requested gap. Outputs
   * are still written.
   */
  SGL_STATUS_NOT_CONVERGED = 4,
  SGL_STATUS_DOMAIN = 5,
  SGL_STATUS_OUT_OF_RANGE = 6,
  SGL_STATUS_PANIC = 7,
} SglStatus;

/**
 * Solutions along a regularization path.
 */
typedef struct SglPath SglPath;

/**
 * A design, response, group partition and penalty.
 */
typedef struct SglProblem SglProblem;

typedef struct SglSolverOptions {
  double tolerance;
  size_t max_passes;
  size_t gap_check_every;
  enum SglRule rule;
} SglSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *sgl_last_error_message(void);

/**
 * Default options: gap tolerance 1e-8, 50000 passes, gap check every 10
 * passes, GAP screening.
 */
struct SglSolverOptions sgl_solver_options_default(void);

/**
 * Builds a problem handle.
 *
 * `x` is `n_samples × n_features` in column-major order, `y` has
 * `n_samples` entries and `group_ids[j]` is the group of feature `j`
 * (ids must cover `0..n_groups`). `weights` has `n_groups` entries, or is
 * null for `sqrt(group size)`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths. `out` receives a handle
 * owned by the caller.
 */
enum SglStatus sgl_problem_new(const double *x,
                               size_t n_samples,
                               size_t n_features,
                               const double *y,
                               const size_t *group_ids,
                               size_t n_groups,
                               const double *weights,
                               double tau,
                               struct SglProblem **out);

/**
 * # Safety
 * `handle` must come from [`sgl_problem_new`] and not be used afterwards.
 * Null is accepted.
 */
void sgl_problem_free(struct SglProblem *handle);

/**
 * # Safety
 * `handle` must be a live problem handle; the out pointers may be null.
 */
enum SglStatus sgl_problem_dims(const struct SglProblem *handle,
                                size_t *n_samples,
                                size_t *n_features,
                                size_t *n_groups);

/**
 * Smallest λ at which the zero vector is optimal.
 *
 * # Safety
 * `handle` must be a live problem handle and `out` writable.
 */
enum SglStatus sgl_problem_lambda_max(const struct SglProblem *handle, double *out);

/**
 * Solves at one λ. `init_beta` may be null for a cold start. `beta_out`
 * receives `n_features` coefficients and `gap_out` (nullable) the final
 * duality gap. Returns `NotConverged` when the gap target was missed.
 *
 * # Safety
 * Pointers must be valid for `n_features` entries where applicable.
 */
enum SglStatus sgl_solve(const struct SglProblem *handle,
                         double lambda,
                         const double *init_beta,
                         const struct SglSolverOptions *options,
                         double *beta_out,
                         double *gap_out);

/**
 * Solves on the grid `λ_max·10^(−δt/(T−1))`, `t = 0..T`, with warm starts.
 * The path handle is written even when some point did not converge, in
 * which case `NotConverged` is returned.
 *
 * # Safety
 * `handle` must be live, `options` readable and `out` writable.
 */
enum SglStatus sgl_solve_path(const struct SglProblem *handle,
                              size_t num_points,
                              double delta,
                              const struct SglSolverOptions *options,
                              struct SglPath **out);

/**
 * # Safety
 * `path` must come from [`sgl_solve_path`] and not be used afterwards.
 * Null is accepted.
 */
void sgl_path_free(struct SglPath *path);

/**
 * Number of grid points; 0 for a null handle.
 *
 * # Safety
 * `path` must be null or a live path handle.
 */
size_t sgl_path_len(const struct SglPath *path);

/**
 * λ, final gap and convergence flag of point `index`. Out pointers may be
 * null.
 *
 * # Safety
 * `path` must be a live path handle.
 */
enum SglStatus sgl_path_point(const struct SglPath *path,
                              size_t index,
                              double *lambda_out,
                              double *gap_out,
                              bool *converged_out);

/**
 * Copies the coefficients of point `index` into `beta_out` (`len` must be
 * `n_features`).
 *
 * # Safety
 * `beta_out` must be writable for `len` entries.
 */
enum SglStatus sgl_path_beta(const struct SglPath *path,
                             size_t index,
                             double *beta_out,
                             size_t len);

/**
 * The ν ≥ 0 with `Σ (|x_i| − να)₊² = (νR)²`.
 *
 * # Safety
 * `x` must be readable for `len` entries and `out` writable.
 */
enum SglStatus sgl_lambda_solver(const double *x, size_t len, double alpha, double r, double *out);

/**
 * ε-norm of `x` for ε in [0, 1].
 *
 * # Safety
 * `x` must be readable for `len` entries and `out` writable.
 */
enum SglStatus sgl_epsilon_norm(const double *x, size_t len, double eps, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGL_H */
