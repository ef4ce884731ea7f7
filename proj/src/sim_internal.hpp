#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rsregime/simulate.hpp"

namespace rsr {
namespace detail {

struct Destination {
  int to = 0;
  double prob = 0.0;           // Q(i,to) / lambda_i
  const JumpLaw* law = nullptr;  // owned by the model; null when none declared
};

struct ChiTerm {
  double q = 0.0;
  const JumpLaw* law = nullptr;  // non-null and carrying a nonzero atom
};

struct SegCoeffs {
  Mat S;       // sigma sigma'
  Vec excess;  // mu - r 1
  double r = 0.0;
};

/// Reusable per-thread workspace so segment integration stays allocation-free.
struct SimScratch {
  Vec ha, hm, hb, tmp;
};

/// Precomputed path-simulation tables: chain transition rows, compensator
/// terms, and per-cut-interval coefficient/strategy indices. The time axis is
/// cut at every schedule breakpoint and strategy node, so within an elementary
/// segment the coefficients are constant and the allocation is linear in t;
/// Simpson integration of the drift terms is then exact and sample() does no
/// searching. Built once per Monte Carlo run; sample() is thread-safe.
class PathSampler {
 public:
  PathSampler(const MarketModel& model, Strategy strat);

  void sample(int initial_state, uint64_t seed, PathRecord& rec,
              SimScratch& scr) const;

  /// Chain trajectory only (switch times, regimes, marks); clears the chain
  /// fields of rec and leaves the integral fields untouched.
  void walk_chain(int initial_state, Rng& rng, PathRecord& rec) const;

  const Strategy& strategy() const { return strat_; }

 private:
  void integrate_segment(double a, double b, int state, std::size_t cut,
                         Rng& rng, PathRecord& rec, SimScratch& scr) const;
  void h_lerp(double t, int state, std::size_t cut, Vec& out) const;
  double chi_rate_at(const Vec& h, int state) const;

  const MarketModel* model_;
  Strategy strat_;
  double horizon_ = 0.0;
  double theta_ = 0.0;
  int m_ = 0;

  std::vector<double> lambda_;
  std::vector<std::vector<Destination>> dests_;
  std::vector<Vec> xi_weighted_;  // per state: sum_j Q(i,j) E[Z_ij]
  std::vector<std::vector<ChiTerm>> chi_terms_;
  std::vector<std::vector<SegCoeffs>> piece_coeffs_;  // [state][piece]

  // Elementary time cuts: schedule breakpoints plus (for surface strategies)
  // the interpolation nodes. cuts_[0] == 0, cuts_.back() == horizon.
  std::vector<double> cuts_;
  std::vector<std::vector<int>> piece_of_cut_;  // [state][cut interval]
  std::vector<int> surf_node_of_cut_;           // left surface node per cut interval

  // Constant-strategy fast path: integrands are per-state constants.
  std::vector<Vec> h_rows_;
  std::vector<std::vector<double>> exc_dot_;  // [state][piece] h'(mu - r 1)
  std::vector<std::vector<double>> hsh_;      // [state][piece] h'Sh
  std::vector<double> xi_dot_;
  std::vector<double> chi_rate_;
};

}  // namespace detail
}  // namespace rsr
