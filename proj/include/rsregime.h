/* C interface for the regime-switching risk-sensitive allocation library.
 *
 * Conventions:
 *  - Every function that can fail returns rsr_status; RSR_OK is 0. On failure
 *    rsr_last_error() returns a thread-local message describing what went
 *    wrong (valid until the next library call on the same thread).
 *  - States are zero-based everywhere in this interface. Files written or
 *    read by the library (CSV/JSON) use one-based state labels.
 *  - Handles are created by the library and released with the matching
 *    *_free function. Strings returned through char** are malloc'd and must
 *    be released with rsr_free_string.
 *  - Matrices passed as double* are dense row-major.
 *  - Monte Carlo results are bitwise independent of the thread count: paths
 *    are seeded by index and reduced in a fixed block order.
 */

#ifndef RSREGIME_H
#define RSREGIME_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct rsr_model rsr_model;
typedef struct rsr_surface rsr_surface;

typedef enum rsr_status {
  RSR_OK = 0,
  RSR_EINVAL = 1,      /* null or malformed argument at the C boundary */
  RSR_EVALIDATION = 2, /* model, strategy, or input data rejected */
  RSR_ENUMERIC = 3,    /* solver failure (left safety bounds, no descent, ...) */
  RSR_EIO = 4,         /* file could not be read or written */
  RSR_EINTERNAL = 5    /* unexpected internal failure */
} rsr_status;

const char* rsr_version(void);

/* Thread-local message for the most recent failure; empty string if the last
 * call on this thread succeeded. */
const char* rsr_last_error(void);

void rsr_free_string(char* s);

/* ---------- model ---------- */

rsr_status rsr_model_load(const char* path, rsr_model** out);
rsr_status rsr_model_parse(const char* json_text, rsr_model** out);
void rsr_model_free(rsr_model* model);

/* Structural validation. *passed is set to 1/0; when report_json is non-null
 * it receives {"passed": ..., "issues": [{"where", "message"}, ...]}. */
rsr_status rsr_model_validate(const rsr_model* model, int* passed,
                              char** report_json);

int rsr_model_n_states(const rsr_model* model);
int rsr_model_m_assets(const rsr_model* model);
double rsr_model_horizon(const rsr_model* model);
double rsr_model_theta(const rsr_model* model);

/* Copies the chain generator into q_out (n_states x n_states row-major). */
rsr_status rsr_model_generator(const rsr_model* model, double* q_out);

/* 1 when a jump-size law is declared on the transition from -> to. */
int rsr_model_has_jump_law(const rsr_model* model, int from, int to);

/* ---------- backward solve ---------- */

typedef struct rsr_solve_options {
  int n_steps;               /* target time steps; breakpoints are always kept */
  double grad_tol;           /* inner minimizer gradient tolerance */
  int max_iter;              /* inner minimizer iteration cap */
  double feasibility_margin; /* minimizer keeps min(1 + h'z) above this */
  double ode_tol;            /* invariant-check slack is 10 * ode_tol */
  int step_doubling;         /* 1: track a Richardson error estimate */
} rsr_solve_options;

void rsr_solve_options_init(rsr_solve_options* opts);

rsr_status rsr_solve(const rsr_model* model, const rsr_solve_options* opts,
                     rsr_surface** out);

/* Benchmark variant: jumps driven by an independent point process with
 * matched intensities and laws. */
rsr_status rsr_solve_independent_jumps(const rsr_model* model,
                                       const rsr_solve_options* opts,
                                       rsr_surface** out);

/* ---------- value surface ---------- */

void rsr_surface_free(rsr_surface* surface);

rsr_status rsr_surface_dims(const rsr_surface* surface, int* n_times,
                            int* n_states, int* m_assets);
rsr_status rsr_surface_info(const rsr_surface* surface, double* horizon,
                            double* theta, double* ode_error_estimate);
rsr_status rsr_surface_time(const rsr_surface* surface, int k, double* t);
rsr_status rsr_surface_u(const rsr_surface* surface, int k, int state,
                         double* u);
rsr_status rsr_surface_v(const rsr_surface* surface, int k, int state,
                         double* v);
/* h_out receives m_assets values: the minimizing allocation at node k. */
rsr_status rsr_surface_h(const rsr_surface* surface, int k, int state,
                         double* h_out);
/* JSON array of post-solve invariant warnings (empty array when clean). */
rsr_status rsr_surface_warnings(const rsr_surface* surface, char** json_out);

rsr_status rsr_surface_save_csv(const rsr_surface* surface, const char* path);
rsr_status rsr_surface_save_json(const rsr_surface* surface, const char* path);
rsr_status rsr_surface_load_json(const char* path, rsr_surface** out);

/* ---------- allocations and references ---------- */

/* Jump-free closed form at time t; u_out/v_out are arrays of n_states and
 * either may be null. Fails on models with jump laws. */
rsr_status rsr_closed_form_no_jump(const rsr_model* model, double t,
                                   double* u_out, double* v_out);

/* Log-optimal allocation at (t, state); h_out has m_assets entries.
 * objective (the optimal log-growth rate) and residual (fixed-point residual
 * at the optimum) may be null. */
rsr_status rsr_kelly_allocation(const rsr_model* model, double t, int state,
                                double* h_out, double* objective,
                                double* residual);

/* Residual of the optimal-allocation fixed-point map at h, given the value
 * vector u (n_states, strictly positive). */
rsr_status rsr_fixed_point_residual(const rsr_model* model, double t,
                                    int state, const double* h,
                                    const double* u, double* residual);

/* h_tilde = ((1+theta) h_star - h_kelly) / theta, the residual fund of the
 * two-fund decomposition. Arrays have m_assets entries. */
rsr_status rsr_mutual_fund_split(double theta, int m_assets,
                                 const double* h_star, const double* h_kelly,
                                 double* h_tilde_out);

/* Chain generator under the risk-adjusted measure for constant per-state
 * allocations h_by_state (n_states x m_assets row-major). q_out receives
 * n_states x n_states row-major. */
rsr_status rsr_effective_generator(const rsr_model* model,
                                   const double* h_by_state, double theta,
                                   double* q_out);

/* Uniform-integrability rate of the change-of-measure density. */
rsr_status rsr_density_moment_bound(const rsr_model* model,
                              const double* h_by_state, double* bound);

/* ---------- Monte Carlo ---------- */

typedef struct rsr_mc_options {
  long long n_paths;
  unsigned long long seed;
  int initial_state; /* zero-based */
  int threads;       /* 0: hardware concurrency */
  double k_sigma;    /* verdict band half-width in standard errors */
} rsr_mc_options;

void rsr_mc_options_init(rsr_mc_options* opts);

typedef struct rsr_mc_report {
  double estimate;
  double std_error;
  long long n_paths;
  unsigned long long seed;
  double k_sigma;
  int has_target;
  double target;
  int pass;
  int one_sided; /* 1: pass means estimate <= target + k_sigma * std_error */
  int has_j_theta;
  double j_theta;
  double max_weight_share; /* heavy-tail diagnostic: largest term / sum */
} rsr_mc_report;

/* The simulated strategy is exactly one of: the minimizing allocation of a
 * solved surface (strategy_surface non-null) or constant per-state rows
 * (h_by_state non-null, n_states x m_assets row-major). */

/* Estimates E[exp(-theta log V_T)]; when target is non-null the report gets
 * a two-sided verdict against it. */
rsr_status rsr_estimate_criterion(const rsr_model* model,
                                  const rsr_surface* strategy_surface,
                                  const double* h_by_state,
                                  const rsr_mc_options* mc,
                                  const double* target, rsr_mc_report* out);

/* Estimates E[chi_T] with verdict against 1. */
rsr_status rsr_verify_martingale(const rsr_model* model,
                                 const rsr_surface* strategy_surface,
                                 const double* h_by_state,
                                 const rsr_mc_options* mc, rsr_mc_report* out);

/* Estimates E[chi_T log chi_T] with a one-sided verdict against bound_total
 * (typically rsr_density_moment_bound(...) * horizon). */
rsr_status rsr_chi_log_chi(const rsr_model* model,
                           const rsr_surface* strategy_surface,
                           const double* h_by_state, const rsr_mc_options* mc,
                           double bound_total, rsr_mc_report* out);

/* Importance-weighted check that the chain statistics under the density
 * reproduce the effective generator. json_out receives an array of entries
 * {"kind", "from", "to", "estimate", "std_error", "target", "pass"} with
 * one-based states ("to" is null on intensity rows). */
rsr_status rsr_verify_generator(const rsr_model* model,
                                const double* h_by_state,
                                const rsr_mc_options* mc, char** json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RSREGIME_H */
