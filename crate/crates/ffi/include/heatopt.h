#ifndef HEATOPT_H
#define HEATOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HeatoptSolver {
  HEATOPT_SOLVER_CG = 0,
  HEATOPT_SOLVER_FIXED_POINT = 1,
} HeatoptSolver;

typedef enum HeatoptStatus {
  HEATOPT_STATUS_OK = 0,
  HEATOPT_STATUS_NULL_POINTER = 1,
  HEATOPT_STATUS_INVALID_UTF8 = 2,
  HEATOPT_STATUS_CONFIG = 3,
  HEATOPT_STATUS_CONTRACT = 4,
  HEATOPT_STATUS_NOT_CONVERGED = 5,
  HEATOPT_STATUS_NUMERICAL = 6,
  HEATOPT_STATUS_IO = 7,
  HEATOPT_STATUS_BUFFER_SIZE = 8,
  HEATOPT_STATUS_PANIC = 9,
} HeatoptStatus;

typedef enum HeatoptSweepMode {
  HEATOPT_SWEEP_MODE_OPTIMAL = 0,
  HEATOPT_SWEEP_MODE_FIXED_CONTROL = 1,
} HeatoptSweepMode;

typedef enum HeatoptVariant {
  HEATOPT_VARIANT_DIRICHLET = 0,
  HEATOPT_VARIANT_ROBIN = 1,
} HeatoptVariant;

/**
 * A configured problem instance.
 */
typedef struct HeatoptProblem HeatoptProblem;

/**
 * The result of one optimization.
 */
typedef struct HeatoptReport HeatoptReport;

typedef struct HeatoptConstants {
  double lambda0;
  double lambda1;
  double trace_norm;
  double contraction_dirichlet;
  double contraction_robin;
} HeatoptConstants;

typedef struct HeatoptSummary {
  double cost;
  double grad_norm;
  double tolerance;
  size_t iterations;
  bool converged;
} HeatoptSummary;

typedef struct HeatoptSweepRecord {
  double alpha;
  double state_gap;
  double adjoint_gap;
  /**
   * NaN for fixed-control sweeps.
   */
  double control_gap;
  double boundary_residual;
  double cost_alpha;
} HeatoptSweepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *heatopt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *heatopt_version(void);

/**
 * Parses a TOML configuration. Relative CSV paths resolve against
 * `base_dir`, which may be null for the current directory.
 */
enum HeatoptStatus heatopt_problem_from_toml(const char *toml,
                                             const char *base_dir,
                                             struct HeatoptProblem **out);

/**
 * Loads a TOML configuration file.
 */
enum HeatoptStatus heatopt_problem_from_file(const char *path, struct HeatoptProblem **out);

void heatopt_problem_free(struct HeatoptProblem *problem);

/**
 * Writes the number of mesh nodes, Gamma2 nodes and time steps.
 */
enum HeatoptStatus heatopt_problem_dims(const struct HeatoptProblem *problem,
                                        size_t *n_nodes,
                                        size_t *n_gamma2,
                                        size_t *n_steps);

/**
 * Copies the global indices of the Gamma2 nodes into `buf` (`len` must equal
 * the Gamma2 node count).
 */
enum HeatoptStatus heatopt_problem_gamma2_nodes(const struct HeatoptProblem *problem,
                                                size_t *buf,
                                                size_t len);

enum HeatoptStatus heatopt_constants(const struct HeatoptProblem *problem,
                                     struct HeatoptConstants *out);

/**
 * Solves the optimal control problem with the configured tolerance and
 * iteration cap. A report is produced even when the solver does not
 * converge; the status is then `NotConverged`.
 */
enum HeatoptStatus heatopt_solve(const struct HeatoptProblem *problem,
                                 enum HeatoptVariant variant,
                                 enum HeatoptSolver solver,
                                 struct HeatoptReport **out);

void heatopt_report_free(struct HeatoptReport *report);

enum HeatoptStatus heatopt_report_summary(const struct HeatoptReport *report,
                                          struct HeatoptSummary *out);

/**
 * Copies the distributed control (`n_steps * n_nodes` values).
 */
enum HeatoptStatus heatopt_report_copy_g(const struct HeatoptReport *report,
                                         double *buf,
                                         size_t len);

/**
 * Copies the boundary control (`n_steps * n_gamma2` values).
 */
enum HeatoptStatus heatopt_report_copy_q(const struct HeatoptReport *report,
                                         double *buf,
                                         size_t len);

/**
 * Runs an alpha sweep and writes one record per alpha into `records`
 * (`n_alphas` entries). `passed` receives the sweep's overall check verdict.
 */
enum HeatoptStatus heatopt_sweep(const struct HeatoptProblem *problem,
                                 enum HeatoptSweepMode mode,
                                 const double *alphas,
                                 size_t n_alphas,
                                 struct HeatoptSweepRecord *records,
                                 bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEATOPT_H */
