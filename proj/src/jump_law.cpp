#include "rsregime/jump_law.hpp"

#include <cmath>
#include <numbers>

namespace rsr {

namespace {

double checked_gain(const Vec& h, const Vec& z) {
  const double gain = 1.0 + h.dot(z);
  if (!(gain > 0.0)) {
    throw FeasibilityError(
        "allocation reaches a nonpositive wealth factor on a jump atom "
        "(1 + h'z = " +
        std::to_string(gain) + ")");
  }
  return gain;
}

}  // namespace

JumpLaw::JumpLaw(std::vector<JumpAtom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw ValidationError("jump law needs at least one atom");
  dim_ = static_cast<int>(atoms_.front().z.size());
  if (dim_ < 1) throw ValidationError("jump atoms must have dimension >= 1");

  double total = 0.0;
  mean_ = Vec::Zero(dim_);
  for (const JumpAtom& a : atoms_) {
    if (a.z.size() != dim_)
      throw ValidationError("jump atoms have inconsistent dimensions");
    if (!(a.p > 0.0) || !std::isfinite(a.p))
      throw ValidationError("jump atom mass must be positive and finite");
    for (int d = 0; d < dim_; ++d) {
      if (!std::isfinite(a.z[d]))
        throw ValidationError("jump atom component is not finite");
      if (a.z[d] <= -1.0)
        throw ValidationError("jump atom component <= -1 (total loss)");
      if (a.z[d] != 0.0) is_zero_ = false;
    }
    total += a.p;
    mean_ += a.p * a.z;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("jump atom masses must sum to 1 (got " +
                          std::to_string(total) + ")");
}

JumpLaw JumpLaw::zero(int dim) {
  return JumpLaw({JumpAtom{Vec::Zero(dim), 1.0}});
}

double JumpLaw::min_gain(const Vec& h) const {
  double lo = std::numeric_limits<double>::infinity();
  for (const JumpAtom& a : atoms_) lo = std::min(lo, 1.0 + h.dot(a.z));
  return lo;
}

double JumpLaw::power_integral(const Vec& h, double theta) const {
  double acc = 0.0;
  for (const JumpAtom& a : atoms_)
    acc += a.p * std::pow(checked_gain(h, a.z), -theta);
  return acc;
}

Vec JumpLaw::power_integral_grad(const Vec& h, double theta) const {
  return -theta * tilt_mean(h, theta);
}

Mat JumpLaw::power_integral_hess(const Vec& h, double theta) const {
  Mat acc = Mat::Zero(dim_, dim_);
  for (const JumpAtom& a : atoms_) {
    const double w = a.p * std::pow(checked_gain(h, a.z), -theta - 2.0);
    acc.noalias() += w * (a.z * a.z.transpose());
  }
  return theta * (theta + 1.0) * acc;
}

Vec JumpLaw::tilt_mean(const Vec& h, double theta) const {
  Vec acc = Vec::Zero(dim_);
  for (const JumpAtom& a : atoms_)
    acc += a.p * std::pow(checked_gain(h, a.z), -(1.0 + theta)) * a.z;
  return acc;
}

double JumpLaw::log_moment(const Vec& h) const {
  double acc = 0.0;
  for (const JumpAtom& a : atoms_) acc += a.p * std::log(checked_gain(h, a.z));
  return acc;
}

Vec JumpLaw::log_moment_grad(const Vec& h) const {
  Vec acc = Vec::Zero(dim_);
  for (const JumpAtom& a : atoms_) acc += (a.p / checked_gain(h, a.z)) * a.z;
  return acc;
}

Mat JumpLaw::log_moment_hess(const Vec& h) const {
  Mat acc = Mat::Zero(dim_, dim_);
  for (const JumpAtom& a : atoms_) {
    const double g = checked_gain(h, a.z);
    acc.noalias() -= (a.p / (g * g)) * (a.z * a.z.transpose());
  }
  return acc;
}

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (n < 1) throw ValidationError("quadrature needs at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int mid = (n + 1) / 2;
  for (int i = 0; i < mid; ++i) {
    // Newton iteration on P_n, started from the Chebyshev-like estimate.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

namespace {

struct Panel {
  double a, b;
};

// Per-dimension quadrature atoms (node, unnormalized weight).
void dim_atoms(const DensitySpec& spec, int d, std::vector<double>& xs,
               std::vector<double>& ws) {
  const double a = spec.a[d], b = spec.b[d];
  std::vector<Panel> panels;
  if (spec.family == DensitySpec::Family::TruncDoubleExp) {
    const double m = spec.location[d];
    if (m > a && m < b)
      panels = {{a, m}, {m, b}};
    else
      panels = {{a, b}};
  } else {
    panels = {{a, b}};
  }

  std::vector<double> gx, gw;
  gauss_legendre(spec.nodes, gx, gw);

  xs.clear();
  ws.clear();
  for (const Panel& pan : panels) {
    const double c = 0.5 * (pan.a + pan.b), half = 0.5 * (pan.b - pan.a);
    for (int k = 0; k < spec.nodes; ++k) {
      const double x = c + half * gx[k];
      double density = 1.0;
      switch (spec.family) {
        case DensitySpec::Family::Uniform:
          density = 1.0;
          break;
        case DensitySpec::Family::TruncNormal: {
          const double t = (x - spec.location[d]) / spec.scale[d];
          density = std::exp(-0.5 * t * t);
          break;
        }
        case DensitySpec::Family::TruncDoubleExp:
          density = std::exp(-std::abs(x - spec.location[d]) / spec.scale[d]);
          break;
      }
      const double w = gw[k] * half * density;
      if (w > 0.0) {
        xs.push_back(x);
        ws.push_back(w);
      }
    }
  }
}

}  // namespace

JumpLaw discretize_density(const DensitySpec& spec) {
  const int m = static_cast<int>(spec.a.size());
  if (m < 1) throw ValidationError("density spec needs at least one dimension");
  if (spec.b.size() != m)
    throw ValidationError("density spec bounds have mismatched dimensions");
  const bool needs_params = spec.family != DensitySpec::Family::Uniform;
  if (needs_params && (spec.location.size() != m || spec.scale.size() != m))
    throw ValidationError("density spec location/scale must match dimension");
  if (spec.nodes < 1) throw ValidationError("density spec needs nodes >= 1");

  for (int d = 0; d < m; ++d) {
    if (!std::isfinite(spec.a[d]) || !std::isfinite(spec.b[d]))
      throw ValidationError("density support must be finite");
    if (spec.a[d] <= -1.0)
      throw ValidationError("density support must stay strictly above -1");
    if (!(spec.b[d] > spec.a[d]))
      throw ValidationError("density support must have positive width");
    if (needs_params && !(spec.scale[d] > 0.0))
      throw ValidationError("density scale must be positive");
  }

  std::vector<std::vector<double>> xs(m), ws(m);
  for (int d = 0; d < m; ++d) dim_atoms(spec, d, xs[d], ws[d]);

  // Cartesian product over dimensions.
  std::vector<JumpAtom> atoms;
  std::vector<int> idx(m, 0);
  for (;;) {
    Vec z(m);
    double w = 1.0;
    for (int d = 0; d < m; ++d) {
      z[d] = xs[d][idx[d]];
      w *= ws[d][idx[d]];
    }
    atoms.push_back(JumpAtom{std::move(z), w});
    int d = m - 1;
    while (d >= 0 && ++idx[d] == static_cast<int>(xs[d].size())) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }

  double total = 0.0;
  for (const JumpAtom& a : atoms) total += a.p;
  if (!(total > 0.0))
    throw ValidationError("density discretization produced zero total mass");
  for (JumpAtom& a : atoms) a.p /= total;
  return JumpLaw(std::move(atoms));
}

}  // namespace rsr
