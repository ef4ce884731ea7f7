#pragma once

#include <string>
#include <vector>

#include "rsregime/market_model.hpp"

namespace rsr {

struct MinimizeOptions {
  double grad_tol = 1e-10;          ///< stop when ||grad||_inf <= grad_tol
  int max_iter = 200;
  double feasibility_margin = 1e-10;///< iterates keep min(1 + h'z) >= margin
  double armijo_c = 1e-4;
};

struct MinimizeResult {
  Vec h;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool boundary = false;  ///< stopped against the admissible-set boundary
};

/// Running cost g(t,i,h) of the exponential-of-integral representation of the
/// risk-sensitive criterion: quadratic diffusion part, excess return, and the
/// compensated power moments of the transition jumps. Convex in h.
class GFunction {
 public:
  explicit GFunction(const MarketModel& model) : model_(&model) {}

  double value(double t, int i, const Vec& h) const;
  Vec grad(double t, int i, const Vec& h) const;

  /// Minimizes g(t,i,.) over the admissible set by damped Newton.
  MinimizeResult minimize(double t, int i, const MinimizeOptions& opt = {},
                          const Vec* warm_start = nullptr) const;

  /// min over all states and schedule pieces of min_h g. Needed for the
  /// a-priori solution bounds.
  double global_min(const MinimizeOptions& opt = {}) const;

 private:
  const MarketModel* model_;
};

/// Value of the coupled backward-operator candidate at allocation h:
/// generator-tilted coupling to the other states plus theta * g * u(i).
double operator_A(const MarketModel& model, const Vec& u, double t, int i,
                  const Vec& h);

/// Gradient in h of operator_A (used by tests and the minimizer).
Vec operator_A_grad(const MarketModel& model, const Vec& u, double t, int i,
                    const Vec& h);

/// Same quantity for the benchmark market whose jumps are driven by an
/// independent point process with matched intensity and mixture law. The jump
/// convexity is weighted by u(i) instead of u(j); both operators coincide
/// whenever u is constant across states.
double independent_jumps_operator(const MarketModel& model, const Vec& u,
                                  double t, int i, const Vec& h);

/// Minimum of operator_A over the admissible set (damped Newton with exact
/// Hessian, warm-started). u must be strictly positive.
MinimizeResult minimize_A(const MarketModel& model, const Vec& u, double t,
                          int i, const MinimizeOptions& opt = {},
                          const Vec* warm_start = nullptr);

MinimizeResult minimize_A_independent(const MarketModel& model, const Vec& u,
                                      double t, int i,
                                      const MinimizeOptions& opt = {},
                                      const Vec* warm_start = nullptr);

/// A-priori envelope of the value function: exp(theta*g_min*(T-t)) <= u <=
/// exp(-theta*r_min*(T-t)), plus the safety box used during integration.
struct DomainBounds {
  double g_min = 0.0;
  double r_min = 0.0;
  double u_min = 1.0;
  double u_max = 1.0;
};

DomainBounds domain_bounds(const MarketModel& model,
                           const MinimizeOptions& opt = {});

struct SolveOptions {
  int n_steps = 200;        ///< target step count; grid also honors breakpoints
  MinimizeOptions minimize;
  double ode_tol = 1e-9;    ///< invariant-check slack is 10 * ode_tol
  bool step_doubling = false;  ///< track a Richardson error estimate
  bool independent_variant = false;  ///< solve the matched-intensity benchmark
};

/// Discrete value surface on a fixed time grid: u, v = -log(u)/theta, the
/// minimizing allocation per node/state, and minimizer diagnostics.
class ValueSurface {
 public:
  int n_states = 0;
  int m_assets = 0;
  double horizon = 0.0;
  double theta = 0.0;

  std::vector<double> times;  ///< ascending; front() == 0, back() == horizon
  Mat u;                      ///< n_times x n_states
  Mat v;
  std::vector<Mat> h;         ///< per node: n_states x m_assets
  Mat grad_norm;              ///< minimizer gradient norm per node/state
  Eigen::MatrixXi boundary;   ///< 1 where the minimizer stopped at the boundary
  Eigen::MatrixXi iterations;

  double ode_error_estimate = -1.0;  ///< Richardson estimate; -1 if not tracked
  DomainBounds bounds;
  std::vector<std::string> warnings;  ///< invariant violations found post-solve

  int n_times() const { return static_cast<int>(times.size()); }
  double u0(int i) const { return u(0, i); }
  Vec h_node(int k, int i) const { return h[k].row(i).transpose(); }

  /// Piecewise-linear interpolation of the allocation in time.
  Vec h_interp(double t, int i) const;
};

/// Integrates the backward equation du/dt + min_h A(u,h) = 0 from u(T) = 1
/// with classic fixed-grid RK4. The grid contains every coefficient
/// breakpoint so each step sees constant coefficients. Throws SolverError if
/// u leaves the safety box.
ValueSurface solve_hjb(const MarketModel& model, const SolveOptions& opt = {});

struct ClosedFormResult {
  Vec u;
  Vec v;
};

/// Jump-free closed form via the matrix exponential of Q + theta*diag(g*)
/// accumulated across schedule pieces. Errors on models with jumps.
ClosedFormResult closed_form_no_jump(const MarketModel& model, double t);

/// Post-solve invariant check: terminal condition, monotonicity in t, and the
/// a-priori bounds, all within 10x the ODE tolerance. Returns violations.
std::vector<std::string> check_surface_invariants(const ValueSurface& surface,
                                                  const MarketModel& model,
                                                  double ode_tol);

/// Grid nodes on [0, horizon]: near-uniform with n_steps target steps,
/// refined so every schedule breakpoint is a node.
std::vector<double> build_time_grid(const MarketModel& model, int n_steps);

/// Surface persistence. CSV columns: t,state,u,v,h_1..h_m,min_diag with
/// 1-based states and min_diag = 1 where the minimizer was boundary-limited.
/// The JSON mirror carries full diagnostics and round-trips exactly.
void save_surface_csv(const ValueSurface& surface, const std::string& path);
void save_surface_json(const ValueSurface& surface, const std::string& path);
ValueSurface load_surface_json(const std::string& path);

}  // namespace rsr
