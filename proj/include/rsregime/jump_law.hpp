#pragma once

#include <vector>

#include "rsregime/common.hpp"

namespace rsr {

/// One support point of a discrete jump-size law.
struct JumpAtom {
  Vec z;     ///< relative price jump per asset; every component > -1
  double p;  ///< probability mass, strictly positive
};

/// Discrete law of the simultaneous asset-price jump attached to one factor
/// transition. Every integral transform the solvers need (power moments,
/// their derivatives, log moments) reduces to an exact finite sum over atoms,
/// so there is no quadrature error anywhere downstream of construction.
class JumpLaw {
 public:
  /// Validates atoms: masses positive and summing to 1 within 1e-12,
  /// components finite and > -1, consistent dimensions.
  explicit JumpLaw(std::vector<JumpAtom> atoms);

  /// Degenerate law: a single zero jump (used for transitions without jumps).
  static JumpLaw zero(int dim);

  const std::vector<JumpAtom>& atoms() const { return atoms_; }
  int dim() const { return dim_; }

  /// E[Z], cached at construction.
  const Vec& mean() const { return mean_; }

  /// True if every atom is exactly the zero vector.
  bool is_zero() const { return is_zero_; }

  /// min over atoms of 1 + h'z. Positive iff h is feasible for this law.
  double min_gain(const Vec& h) const;

  bool feasible(const Vec& h, double margin = 0.0) const {
    return min_gain(h) > margin;
  }

  /// E[(1 + h'Z)^{-theta}]. Throws FeasibilityError if any 1 + h'z <= 0.
  double power_integral(const Vec& h, double theta) const;

  /// Gradient in h of power_integral: -theta * E[Z (1 + h'Z)^{-theta-1}].
  Vec power_integral_grad(const Vec& h, double theta) const;

  /// Hessian in h: theta(theta+1) * E[Z Z' (1 + h'Z)^{-theta-2}].
  Mat power_integral_hess(const Vec& h, double theta) const;

  /// E[Z (1 + h'Z)^{-(1+theta)}], the kernel of the optimal-allocation
  /// fixed-point map. At theta = 0 this is the Kelly kernel E[Z / (1 + h'Z)].
  Vec tilt_mean(const Vec& h, double theta) const;

  /// E[log(1 + h'Z)] and its first two derivatives (log-growth terms).
  double log_moment(const Vec& h) const;
  Vec log_moment_grad(const Vec& h) const;
  Mat log_moment_hess(const Vec& h) const;

 private:
  std::vector<JumpAtom> atoms_;
  Vec mean_;
  int dim_ = 0;
  bool is_zero_ = true;
};

/// Parametric jump-size density to be collapsed onto quadrature atoms.
/// Multi-asset specs are product measures with per-dimension parameters.
struct DensitySpec {
  enum class Family { Uniform, TruncNormal, TruncDoubleExp };

  Family family = Family::Uniform;
  Vec a;         ///< lower support bound per dimension, each > -1
  Vec b;         ///< upper support bound per dimension, finite, > a
  Vec location;  ///< mean (TruncNormal) or mode (TruncDoubleExp); ignored for Uniform
  Vec scale;     ///< sd (TruncNormal) or scale (TruncDoubleExp); ignored for Uniform
  int nodes = 16;  ///< Gauss-Legendre nodes per dimension (per smooth piece)
};

/// Collapses a density onto Gauss-Legendre atoms: nodes on the truncated
/// support, weights proportional to quadrature weight times density value,
/// renormalized to total mass 1. The double-exponential family is split at
/// its mode so each quadrature panel sees a smooth integrand.
JumpLaw discretize_density(const DensitySpec& spec);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace rsr
