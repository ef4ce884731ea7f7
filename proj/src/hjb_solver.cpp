#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "rsregime/hjb.hpp"
#include "state_context.hpp"

namespace rsr {

namespace {
constexpr double kTimeTol = 1e-12;
}

std::vector<double> build_time_grid(const MarketModel& model, int n_steps) {
  if (n_steps < 2) throw ValidationError("n_steps must be >= 2");
  const std::vector<double> bps = model.breakpoints();
  const double T = model.horizon;
  std::vector<double> grid;
  for (size_t seg = 0; seg + 1 < bps.size(); ++seg) {
    const double a = bps[seg], b = bps[seg + 1];
    const int k = std::max<int>(1, static_cast<int>(std::llround(
                                       n_steps * (b - a) / T)));
    for (int j = 0; j < k; ++j) grid.push_back(a + (b - a) * j / k);
  }
  grid.push_back(T);
  return grid;
}

Vec ValueSurface::h_interp(double t, int i) const {
  const double tc = std::clamp(t, times.front(), times.back());
  const auto it = std::upper_bound(times.begin(), times.end(), tc);
  const int hi = std::clamp<int>(static_cast<int>(it - times.begin()), 1,
                                 n_times() - 1);
  const int lo = hi - 1;
  const double span = times[hi] - times[lo];
  const double w = span > 0.0 ? (tc - times[lo]) / span : 0.0;
  return (1.0 - w) * h[lo].row(i).transpose() + w * h[hi].row(i).transpose();
}

namespace {

struct StepEvaluator {
  const MarketModel& model;
  const MinimizeOptions& opt;
  const bool independent;
  std::vector<Vec> warm;

  StepEvaluator(const MarketModel& m, const MinimizeOptions& o, bool ind)
      : model(m), opt(o), independent(ind) {
    warm.assign(m.n_states, Vec::Zero(m.m_assets));
  }

  // min_h A(u, h) per state; u from intermediate RK stages must stay usable.
  // Coefficients are resolved at the step midpoint so a step never straddles
  // a schedule boundary (the grid contains every breakpoint).
  Vec minimized(const Vec& u) {
    for (int i = 0; i < u.size(); ++i)
      if (!(u[i] > 0.0))
        throw SolverError("intermediate value left the positive cone");
    Vec out(model.n_states);
    for (int i = 0; i < model.n_states; ++i) {
      MinimizeResult res =
          independent
              ? minimize_A_independent(model, u, mid_time, i, opt, &warm[i])
              : minimize_A(model, u, mid_time, i, opt, &warm[i]);
      warm[i] = res.h;
      out[i] = res.value;
    }
    return out;
  }

  MinimizeResult node_minimize(const Vec& u, double t, int i) {
    MinimizeResult res = independent
                             ? minimize_A_independent(model, u, t, i, opt,
                                                      &warm[i])
                             : minimize_A(model, u, t, i, opt, &warm[i]);
    warm[i] = res.h;
    return res;
  }

  double mid_time = 0.0;
};

Vec rk4_step(StepEvaluator& ev, const Vec& u, double dt) {
  const Vec k1 = ev.minimized(u);
  const Vec k2 = ev.minimized(u + 0.5 * dt * k1);
  const Vec k3 = ev.minimized(u + 0.5 * dt * k2);
  const Vec k4 = ev.minimized(u + dt * k3);
  return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

ValueSurface solve_hjb(const MarketModel& model, const SolveOptions& opt) {
  const ValidationReport report = validate_model(model);
  if (!report.passed) throw ValidationError(report.to_string());

  const int N = model.n_states, m = model.m_assets;
  ValueSurface surf;
  surf.n_states = N;
  surf.m_assets = m;
  surf.horizon = model.horizon;
  surf.theta = model.theta;
  surf.times = build_time_grid(model, opt.n_steps);
  const int nt = surf.n_times();

  surf.u = Mat::Zero(nt, N);
  surf.v = Mat::Zero(nt, N);
  surf.h.assign(nt, Mat::Zero(N, m));
  surf.grad_norm = Mat::Zero(nt, N);
  surf.boundary = Eigen::MatrixXi::Zero(nt, N);
  surf.iterations = Eigen::MatrixXi::Zero(nt, N);
  surf.bounds = domain_bounds(model, opt.minimize);

  const double band_lo = 0.5 * surf.bounds.u_min;
  const double band_hi = 2.0 * surf.bounds.u_max;

  StepEvaluator ev(model, opt.minimize, opt.independent_variant);

  auto store_node = [&](int k, const Vec& u) {
    surf.u.row(k) = u.transpose();
    surf.v.row(k) = (-u.array().log() / model.theta).transpose();
    for (int i = 0; i < N; ++i) {
      const MinimizeResult res = ev.node_minimize(u, surf.times[k], i);
      surf.h[k].row(i) = res.h.transpose();
      surf.grad_norm(k, i) = res.grad_norm;
      surf.boundary(k, i) = res.boundary ? 1 : 0;
      surf.iterations(k, i) = res.iterations;
    }
  };

  Vec u = Vec::Ones(N);
  store_node(nt - 1, u);

  double err_max = 0.0;
  for (int k = nt - 1; k > 0; --k) {
    const double t_hi = surf.times[k], t_lo = surf.times[k - 1];
    const double dt = t_hi - t_lo;
    ev.mid_time = 0.5 * (t_lo + t_hi);

    const Vec u_full = rk4_step(ev, u, dt);
    if (opt.step_doubling) {
      const Vec u_half = rk4_step(ev, rk4_step(ev, u, 0.5 * dt), 0.5 * dt);
      err_max = std::max(
          err_max, (u_full - u_half).lpNorm<Eigen::Infinity>() / 15.0);
      u = u_half;
    } else {
      u = u_full;
    }

    for (int i = 0; i < N; ++i) {
      if (!(u[i] >= band_lo && u[i] <= band_hi)) {
        std::ostringstream os;
        os << "value left the safety band at t = " << t_lo << ", state "
           << (i + 1) << ": u = " << u[i] << ", band = [" << band_lo << ", "
           << band_hi << "]";
        throw SolverError(os.str());
      }
    }
    store_node(k - 1, u);
  }
  if (opt.step_doubling) surf.ode_error_estimate = err_max;

  surf.warnings = check_surface_invariants(surf, model, opt.ode_tol);
  return surf;
}

std::vector<std::string> check_surface_invariants(const ValueSurface& surf,
                                                  const MarketModel& model,
                                                  double ode_tol) {
  std::vector<std::string> out;
  const double tol = 10.0 * ode_tol;
  const int nt = surf.n_times();
  const double T = model.horizon;

  auto note = [&out](const std::string& msg) { out.push_back(msg); };

  for (int i = 0; i < surf.n_states; ++i) {
    if (surf.u(nt - 1, i) != 1.0)
      note("terminal condition violated in state " + std::to_string(i + 1));
    for (int k = 0; k + 1 < nt; ++k) {
      if (surf.u(k + 1, i) < surf.u(k, i) - tol) {
        note("u not nondecreasing in t at t = " + std::to_string(surf.times[k]) +
             ", state " + std::to_string(i + 1));
        break;
      }
    }
    for (int k = 0; k < nt; ++k) {
      const double tau = T - surf.times[k];
      const double lo = std::exp(model.theta * surf.bounds.g_min * tau);
      const double hi = std::exp(-model.theta * surf.bounds.r_min * tau);
      if (surf.u(k, i) < lo - tol || surf.u(k, i) > hi + tol) {
        note("u outside the a-priori envelope at t = " +
             std::to_string(surf.times[k]) + ", state " + std::to_string(i + 1));
        break;
      }
    }
  }
  return out;
}

ClosedFormResult closed_form_no_jump(const MarketModel& model, double t) {
  if (model.any_jumps())
    throw ValidationError(
        "closed form applies to jump-free models only");
  if (t < -kTimeTol || t > model.horizon + kTimeTol)
    throw ValidationError("t outside [0, horizon]");

  const int N = model.n_states;
  const double th = model.theta;
  GFunction g(model);

  // Breakpoints from t to the horizon; within each segment the optimal
  // running cost per state is constant, so the propagator is one matrix
  // exponential per segment, composed in time order.
  std::vector<double> bps = model.breakpoints();
  std::vector<double> cuts = {t};
  for (double b : bps)
    if (b > t + kTimeTol && b < model.horizon - kTimeTol) cuts.push_back(b);
  cuts.push_back(model.horizon);

  Vec u = Vec::Ones(N);
  for (size_t seg = cuts.size() - 1; seg-- > 0;) {
    const double a = cuts[seg], b = cuts[seg + 1];
    const double t_mid = 0.5 * (a + b);
    Mat M = model.generator;
    for (int i = 0; i < N; ++i) {
      const CoeffPiece& piece = model.piece_at(i, t_mid);
      const Mat S = piece.covariance();
      const Vec excess = piece.mu - Vec::Constant(model.m_assets, piece.r);
      const double g_star =
          -excess.dot(Eigen::LLT<Mat>(S).solve(excess)) / (2.0 * (th + 1.0)) -
          piece.r;
      M(i, i) += th * g_star;
    }
    u = (M * (b - a)).exp() * u;
  }

  ClosedFormResult res;
  res.u = u;
  res.v = -u.array().log() / th;
  return res;
}

}  // namespace rsr
