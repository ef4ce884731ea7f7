#include <cmath>

#include "damped_newton.hpp"
#include "rsregime/hjb.hpp"
#include "state_context.hpp"

namespace rsr {

using detail::StateContext;

namespace {

void check_state(const MarketModel& model, int i) {
  if (i < 0 || i >= model.n_states)
    throw ValidationError("state index out of range");
}

void check_u(const MarketModel& model, const Vec& u) {
  if (u.size() != model.n_states)
    throw ValidationError("u has wrong length");
  for (int j = 0; j < u.size(); ++j)
    if (!(u[j] > 0.0))
      throw ValidationError("u must be strictly positive");
}

double g_value_ctx(const StateContext& c, const Vec& h) {
  const double th = c.theta;
  double val = 0.5 * (th + 1.0) * h.dot(c.S * h) - c.r - h.dot(c.excess);
  for (const auto& j : c.jumps) {
    const double pi = j.law ? j.law->power_integral(h, th) : 1.0;
    const double xi_h = j.law ? h.dot(j.law->mean()) : 0.0;
    val += j.q * ((pi - 1.0) / th + xi_h);
  }
  return val;
}

Vec g_grad_ctx(const StateContext& c, const Vec& h) {
  const double th = c.theta;
  Vec g = (th + 1.0) * (c.S * h) - c.excess;
  for (const auto& j : c.jumps)
    if (j.law)
      g += j.q * (j.law->power_integral_grad(h, th) / th + j.law->mean());
  return g;
}

Mat g_hess_ctx(const StateContext& c, const Vec& h) {
  const double th = c.theta;
  Mat H = (th + 1.0) * c.S;
  for (const auto& j : c.jumps)
    if (j.law) H += (j.q / th) * j.law->power_integral_hess(h, th);
  return H;
}

struct GObjective {
  const StateContext& c;
  double value(const Vec& h) const { return g_value_ctx(c, h); }
  Vec grad(const Vec& h) const { return g_grad_ctx(c, h); }
  Mat hess(const Vec& h) const { return g_hess_ctx(c, h); }
};

// h |-> A(u, h)(t, i) with u fixed. The coupling to other states enters
// through the power moments of the transition jump laws.
struct AObjective {
  const StateContext& c;
  const Vec& u;

  double value(const Vec& h) const {
    const double th = c.theta;
    const double ui = u[c.state];
    double val = ui * (0.5 * th * (th + 1.0) * h.dot(c.S * h) -
                       th * h.dot(c.b) - th * c.r - c.q_total);
    for (const auto& j : c.jumps) {
      const double pi = j.law ? j.law->power_integral(h, th) : 1.0;
      val += j.q * u[j.to] * pi;
    }
    return val;
  }

  Vec grad(const Vec& h) const {
    const double th = c.theta;
    const double ui = u[c.state];
    Vec g = ui * (th * (th + 1.0) * (c.S * h) - th * c.b);
    for (const auto& j : c.jumps)
      if (j.law) g += j.q * u[j.to] * j.law->power_integral_grad(h, th);
    return g;
  }

  Mat hess(const Vec& h) const {
    const double th = c.theta;
    Mat H = u[c.state] * th * (th + 1.0) * c.S;
    for (const auto& j : c.jumps)
      if (j.law) H += j.q * u[j.to] * j.law->power_integral_hess(h, th);
    return H;
  }
};

// Matched-intensity benchmark: the jump convexity is weighted by u(i), and
// the factor coupling becomes the plain generator term.
struct AIndObjective {
  const StateContext& c;
  const Vec& u;

  double value(const Vec& h) const {
    const double th = c.theta;
    const double ui = u[c.state];
    double val = ui * (0.5 * th * (th + 1.0) * h.dot(c.S * h) -
                       th * h.dot(c.b) - th * c.r - 2.0 * c.q_total);
    for (const auto& j : c.jumps) {
      const double pi = j.law ? j.law->power_integral(h, th) : 1.0;
      val += j.q * (ui * pi + u[j.to]);
    }
    return val;
  }

  Vec grad(const Vec& h) const {
    const double th = c.theta;
    const double ui = u[c.state];
    Vec g = ui * (th * (th + 1.0) * (c.S * h) - th * c.b);
    for (const auto& j : c.jumps)
      if (j.law) g += j.q * ui * j.law->power_integral_grad(h, th);
    return g;
  }

  Mat hess(const Vec& h) const {
    const double th = c.theta;
    const double ui = u[c.state];
    Mat H = ui * th * (th + 1.0) * c.S;
    for (const auto& j : c.jumps)
      if (j.law) H += j.q * ui * j.law->power_integral_hess(h, th);
    return H;
  }
};

Vec start_point(const StateContext& c, const Vec* warm,
                const MinimizeOptions& opt, int m) {
  if (warm && warm->size() == m &&
      c.feas.min_gap(*warm) > opt.feasibility_margin)
    return *warm;
  return Vec::Zero(m);  // 0 is always strictly feasible
}

}  // namespace

double GFunction::value(double t, int i, const Vec& h) const {
  check_state(*model_, i);
  return g_value_ctx(detail::make_state_context(*model_, i, t), h);
}

Vec GFunction::grad(double t, int i, const Vec& h) const {
  check_state(*model_, i);
  return g_grad_ctx(detail::make_state_context(*model_, i, t), h);
}

MinimizeResult GFunction::minimize(double t, int i, const MinimizeOptions& opt,
                                   const Vec* warm_start) const {
  check_state(*model_, i);
  const StateContext c = detail::make_state_context(*model_, i, t);
  return detail::damped_newton(GObjective{c}, c.feas,
                               start_point(c, warm_start, opt, model_->m_assets),
                               opt);
}

double GFunction::global_min(const MinimizeOptions& opt) const {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < model_->n_states; ++i) {
    Vec warm = Vec::Zero(model_->m_assets);
    for (const CoeffPiece& piece : model_->coeffs[i]) {
      const double t_mid = 0.5 * (piece.t_start + piece.t_end);
      const MinimizeResult res = minimize(t_mid, i, opt, &warm);
      warm = res.h;
      lo = std::min(lo, res.value);
    }
  }
  return lo;
}

double operator_A(const MarketModel& model, const Vec& u, double t, int i,
                  const Vec& h) {
  check_state(model, i);
  check_u(model, u);
  const StateContext c = detail::make_state_context(model, i, t);
  return AObjective{c, u}.value(h);
}

Vec operator_A_grad(const MarketModel& model, const Vec& u, double t, int i,
                    const Vec& h) {
  check_state(model, i);
  check_u(model, u);
  const StateContext c = detail::make_state_context(model, i, t);
  return AObjective{c, u}.grad(h);
}

double independent_jumps_operator(const MarketModel& model, const Vec& u,
                                  double t, int i, const Vec& h) {
  check_state(model, i);
  check_u(model, u);
  const StateContext c = detail::make_state_context(model, i, t);
  return AIndObjective{c, u}.value(h);
}

MinimizeResult minimize_A(const MarketModel& model, const Vec& u, double t,
                          int i, const MinimizeOptions& opt,
                          const Vec* warm_start) {
  check_state(model, i);
  check_u(model, u);
  const StateContext c = detail::make_state_context(model, i, t);
  return detail::damped_newton(AObjective{c, u}, c.feas,
                               start_point(c, warm_start, opt, model.m_assets),
                               opt);
}

MinimizeResult minimize_A_independent(const MarketModel& model, const Vec& u,
                                      double t, int i,
                                      const MinimizeOptions& opt,
                                      const Vec* warm_start) {
  check_state(model, i);
  check_u(model, u);
  const StateContext c = detail::make_state_context(model, i, t);
  return detail::damped_newton(AIndObjective{c, u}, c.feas,
                               start_point(c, warm_start, opt, model.m_assets),
                               opt);
}

DomainBounds domain_bounds(const MarketModel& model,
                           const MinimizeOptions& opt) {
  DomainBounds db;
  db.g_min = GFunction(model).global_min(opt);
  db.r_min = model.r_min();
  const double T = model.horizon;
  db.u_min = std::min(1.0, std::exp(model.theta * db.g_min * T));
  db.u_max = std::max(1.0, std::exp(-model.theta * db.r_min * T));
  return db;
}

}  // namespace rsr
