#pragma once

// Reference numerics for the tests, deliberately independent of the library
// implementation: adaptive quadrature instead of Gauss-Legendre collapse,
// scan-plus-golden-section instead of Newton, central differences instead of
// analytic derivatives. Agreement with these is evidence, not tautology.

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

using Fn1 = std::function<double(double)>;

namespace detail {

inline double simpson(const Fn1& f, double a, double fa, double m, double fm,
                      double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const Fn1& f, double a, double fa, double m,
                            double fm, double b, double fb, double whole,
                            double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, lm, flm, m, fm);
  const double right = simpson(f, m, fm, rm, frm, b, fb);
  const double err = left + right - whole;
  if (depth <= 0) throw std::runtime_error("adaptive Simpson: depth exhausted");
  if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
  return adaptive_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
inline double integrate(const Fn1& f, double a, double b, double tol = 1e-12) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return detail::adaptive_step(f, a, fa, m, fm, b, fb,
                               detail::simpson(f, a, fa, m, fm, b, fb), tol,
                               50);
}

/// Central-difference gradient of a scalar field.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double eps = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += eps;
    xm[k] -= eps;
    g[k] = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return g;
}

/// Minimizer of a unimodal f on [lo, hi]: coarse scan to bracket, then
/// golden-section refinement down to interval width tol.
inline double golden_min(const Fn1& f, double lo, double hi,
                         double tol = 1e-10, int scan = 200) {
  double best_x = lo, best_f = f(lo);
  for (int k = 1; k <= scan; ++k) {
    const double x = lo + (hi - lo) * k / scan;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  const double step = (hi - lo) / scan;
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double golden_max(const Fn1& f, double lo, double hi,
                         double tol = 1e-10, int scan = 200) {
  return golden_min([&](double x) { return -f(x); }, lo, hi, tol, scan);
}

}  // namespace oracle
