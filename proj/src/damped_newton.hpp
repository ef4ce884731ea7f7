#pragma once

// Internal damped Newton minimizer for the smooth convex objectives of this
// library (operator values, running cost, negated log growth). The line
// search never evaluates outside the admissible set: the step is capped by
// the exact distance to the feasibility margin before Armijo backtracking.

#include <cmath>
#include <sstream>

#include "rsregime/hjb.hpp"
#include "state_context.hpp"

namespace rsr::detail {

template <class Obj>
MinimizeResult damped_newton(const Obj& obj, const FeasibilityAtoms& feas,
                             Vec h, const MinimizeOptions& opt) {
  MinimizeResult res;
  double f = obj.value(h);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Vec g = obj.grad(h);
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opt.grad_tol) break;

    Mat H = obj.hess(h);
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) {
      // The Hessians here are positive definite in exact arithmetic; a tiny
      // ridge recovers factorization when roundoff makes them borderline.
      H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      llt.compute(H);
      if (llt.info() != Eigen::Success)
        throw SolverError("Newton step failed: Hessian not factorizable");
    }
    const Vec d = -llt.solve(g);
    const double slope = g.dot(d);

    double alpha = std::min(1.0, 0.995 * feas.max_step(h, d, opt.feasibility_margin));

    // Near the minimum the quadratic-model decrease drops below the roundoff
    // noise of the objective and value comparisons stop carrying information.
    // Switch to gradient-norm acceptance there: the Newton step still
    // contracts the gradient, so take it while it does and stop at the
    // attainable floor otherwise.
    const double f_noise =
        64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    if (-slope * alpha <= f_noise) {
      const Vec h_try = h + alpha * d;
      const Vec grad_try = obj.grad(h_try);
      const double g_try = grad_try.lpNorm<Eigen::Infinity>();
      if (g_try < res.grad_norm) {
        h = h_try;
        f = obj.value(h);
        continue;
      }
      if (feas.min_gap(h) <= 10.0 * opt.feasibility_margin) res.boundary = true;
      break;
    }

    bool accepted = false;
    while (alpha >= 1e-14) {
      const Vec h_try = h + alpha * d;
      const double f_try = obj.value(h_try);
      if (f_try <= f + opt.armijo_c * alpha * slope) {
        h = h_try;
        f = f_try;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (feas.min_gap(h) <= 10.0 * opt.feasibility_margin) {
        res.boundary = true;  // pressed against the admissible-set boundary
        break;
      }
      if (res.grad_norm <= 1e3 * opt.grad_tol) break;  // flat to roundoff
      std::ostringstream os;
      os << "Newton stalled at gradient norm " << res.grad_norm;
      throw SolverError(os.str());
    }
  }
  if (it == opt.max_iter && res.grad_norm > opt.grad_tol && !res.boundary) {
    std::ostringstream os;
    os << "Newton hit the iteration cap (" << opt.max_iter
       << ") at gradient norm " << res.grad_norm;
    throw SolverError(os.str());
  }
  res.h = std::move(h);
  res.value = f;
  res.iterations = it;
  return res;
}

}  // namespace rsr::detail
