#pragma once

#include "rsregime/hjb.hpp"
#include "rsregime/market_model.hpp"

namespace rsr {

struct KellyResult {
  Vec h;              ///< maximizer of the expected log growth rate
  double objective;   ///< log growth rate at h
  double residual;    ///< infinity-norm residual of the Kelly fixed point
  int iterations = 0;
  bool boundary = false;
};

/// Expected log growth rate of wealth at allocation h in state i at time t,
/// including the compensated jump contribution. Globally concave in h.
double log_growth_rate(const MarketModel& model, double t, int i, const Vec& h);

/// Maximizes the log growth rate over the admissible set (damped Newton).
KellyResult kelly_allocation(const MarketModel& model, double t, int i,
                             const MinimizeOptions& opt = {});

/// Infinity norm of h minus the right-hand side of the risk-sensitive
/// fixed-point map at value vector u_vec. Zero (to solver tolerance) at the
/// operator minimizer.
double fixed_point_residual(const MarketModel& model, double t, int i,
                            const Vec& h, const Vec& u_vec, double theta);

/// Same map with the risk-sensitivity dropped (theta -> 0, unit value
/// ratios): the Kelly fixed point.
double kelly_residual(const MarketModel& model, double t, int i, const Vec& h);

/// Hedge component of the two-fund decomposition:
/// h_tilde = ((1+theta) h_star - h_kelly) / theta, so that
/// h_star = h_kelly/(1+theta) + theta/(1+theta) * h_tilde.
Vec mutual_fund_split(const Vec& h_star, const Vec& h_kelly, double theta);

}  // namespace rsr
