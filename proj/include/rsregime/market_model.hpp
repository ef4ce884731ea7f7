#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsregime/common.hpp"
#include "rsregime/jump_law.hpp"

namespace rsr {

/// Market coefficients on one time interval [t_start, t_end) of one state.
struct CoeffPiece {
  double t_start = 0.0;
  double t_end = 0.0;
  Vec mu;     ///< drift per asset
  Mat sigma;  ///< volatility matrix (m x m); diffusion covariance is sigma*sigma'
  double r = 0.0;  ///< short rate

  Mat covariance() const { return sigma * sigma.transpose(); }
};

/// Finite-factor market: a continuous-time chain over n_states regimes with
/// generator Q, m_assets risky assets with piecewise-constant coefficients
/// per regime, and jump-size laws attached to regime transitions so price
/// jumps coincide with factor switches.
class MarketModel {
 public:
  int n_states = 0;
  int m_assets = 0;
  double horizon = 0.0;
  double theta = 0.0;        ///< risk-sensitivity parameter, > 0
  double vol_epsilon = 1e-8; ///< nondegeneracy floor for sigma*sigma'
  Mat generator;             ///< Q, n_states x n_states

  /// coeffs[i] is the schedule of state i, covering [0, horizon].
  std::vector<std::vector<CoeffPiece>> coeffs;

  void set_jump_law(int from, int to, JumpLaw law);

  /// Law attached to transition from->to, or nullptr when none declared.
  const JumpLaw* jump_law(int from, int to) const;

  /// Transition intensity out of state i.
  double lambda(int i) const { return -generator(i, i); }

  /// Piece index covering time t in state i's schedule; t == horizon maps to
  /// the last piece. Assumes a validated schedule.
  int piece_index(int i, double t) const;
  const CoeffPiece& piece_at(int i, double t) const;

  /// Sorted union of all schedule boundaries, always containing 0 and horizon.
  std::vector<double> breakpoints() const;

  double r_min() const;

  /// True if any declared law carries a nonzero atom.
  bool any_jumps() const;

 private:
  // Dense (from, to) -> law table; empty optional where no law is declared.
  std::vector<std::optional<JumpLaw>> laws_;
};

struct ValidationIssue {
  std::string where;
  std::string message;
};

struct ValidationReport {
  bool passed = true;
  std::vector<ValidationIssue> issues;
  std::string to_string() const;
};

/// Structural validation: generator shape/signs/row sums, schedules covering
/// [0, horizon] without gaps or overlaps, nondegenerate diffusion, valid jump
/// laws, theta > 0. Reports everything it finds; never mutates the model.
ValidationReport validate_model(const MarketModel& model);

/// Allocations h with 1 + h'z > 0 for every jump size z reachable from one
/// state. Open, convex, contains 0.
class AdmissibleSet {
 public:
  AdmissibleSet(int state, std::vector<Vec> constraints);

  int state() const { return state_; }
  bool unconstrained() const { return constraints_.empty(); }

  /// Nonzero jump atoms that generate the constraints.
  const std::vector<Vec>& constraints() const { return constraints_; }

  /// min over constraints of 1 + h'z (+inf when unconstrained).
  double min_gap(const Vec& h) const;

  bool feasible(const Vec& h, double margin = 0.0) const {
    return min_gap(h) > margin;
  }

  /// Open interval (lo, hi) of feasible allocations; single-asset sets only.
  std::pair<double, double> bounds_1d() const;

 private:
  int state_;
  std::vector<Vec> constraints_;
};

/// Builds the admissible set of state i from the union of the supports of all
/// laws declared on transitions out of i.
AdmissibleSet admissible_set(const MarketModel& model, int i);

inline bool is_feasible(const AdmissibleSet& set, const Vec& h,
                        double margin = 0.0) {
  return set.feasible(h, margin);
}

}  // namespace rsr
