#include "rsregime/strategies.hpp"

#include <cmath>

#include "damped_newton.hpp"
#include "state_context.hpp"

namespace rsr {

using detail::StateContext;

namespace {

double ell_value(const StateContext& c, const Vec& h) {
  double val = c.r + h.dot(c.excess) - 0.5 * h.dot(c.S * h);
  for (const auto& j : c.jumps)
    if (j.law) val += j.q * (j.law->log_moment(h) - h.dot(j.law->mean()));
  return val;
}

Vec ell_grad(const StateContext& c, const Vec& h) {
  Vec g = c.excess - c.S * h;
  for (const auto& j : c.jumps)
    if (j.law) g += j.q * (j.law->log_moment_grad(h) - j.law->mean());
  return g;
}

Mat ell_hess(const StateContext& c, const Vec& h) {
  Mat H = -c.S;
  for (const auto& j : c.jumps)
    if (j.law) H += j.q * j.law->log_moment_hess(h);
  return H;
}

struct NegEllObjective {
  const StateContext& c;
  double value(const Vec& h) const { return -ell_value(c, h); }
  Vec grad(const Vec& h) const { return -ell_grad(c, h); }
  Mat hess(const Vec& h) const { return -ell_hess(c, h); }
};

void check_state(const MarketModel& model, int i) {
  if (i < 0 || i >= model.n_states)
    throw ValidationError("state index out of range");
}

}  // namespace

double log_growth_rate(const MarketModel& model, double t, int i,
                       const Vec& h) {
  check_state(model, i);
  return ell_value(detail::make_state_context(model, i, t), h);
}

KellyResult kelly_allocation(const MarketModel& model, double t, int i,
                             const MinimizeOptions& opt) {
  check_state(model, i);
  const StateContext c = detail::make_state_context(model, i, t);
  const MinimizeResult res = detail::damped_newton(
      NegEllObjective{c}, c.feas, Vec::Zero(model.m_assets), opt);
  KellyResult out;
  out.h = res.h;
  out.objective = -res.value;
  out.residual = kelly_residual(model, t, i, res.h);
  out.iterations = res.iterations;
  out.boundary = res.boundary;
  return out;
}

double fixed_point_residual(const MarketModel& model, double t, int i,
                            const Vec& h, const Vec& u_vec, double theta) {
  check_state(model, i);
  if (u_vec.size() != model.n_states)
    throw ValidationError("u_vec has wrong length");
  for (int j = 0; j < u_vec.size(); ++j)
    if (!(u_vec[j] > 0.0))
      throw ValidationError("u_vec must be strictly positive");
  const StateContext c = detail::make_state_context(model, i, t);
  Vec rhs = c.excess;
  for (const auto& j : c.jumps) {
    if (!j.law) continue;
    rhs += j.q * ((u_vec[j.to] / u_vec[i]) * j.law->tilt_mean(h, theta) -
                  j.law->mean());
  }
  const Vec target = Eigen::LLT<Mat>(c.S).solve(rhs) / (1.0 + theta);
  return (h - target).lpNorm<Eigen::Infinity>();
}

double kelly_residual(const MarketModel& model, double t, int i, const Vec& h) {
  check_state(model, i);
  const StateContext c = detail::make_state_context(model, i, t);
  Vec rhs = c.excess;
  for (const auto& j : c.jumps) {
    if (!j.law) continue;
    rhs += j.q * (j.law->tilt_mean(h, 0.0) - j.law->mean());
  }
  const Vec target = Eigen::LLT<Mat>(c.S).solve(rhs);
  return (h - target).lpNorm<Eigen::Infinity>();
}

Vec mutual_fund_split(const Vec& h_star, const Vec& h_kelly, double theta) {
  if (h_star.size() != h_kelly.size())
    throw ValidationError("allocation sizes differ");
  if (!(theta > 0.0))
    throw ValidationError("the two-fund split needs theta > 0");
  return ((1.0 + theta) * h_star - h_kelly) / theta;
}

}  // namespace rsr
