#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "rsregime/hjb.hpp"
#include "rsregime/market_model.hpp"

namespace rsr {

/// Deterministic RNG: mt19937_64 (bit-exact across platforms) with hand-rolled
/// transforms, so streams do not depend on standard-library distribution
/// internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate via inverse CDF.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  /// Standard normal via Box-Muller (spare cached).
  double normal();

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t splitmix64(uint64_t x);

/// Per-path sub-seed: mixes the run seed with the path index so path i's
/// stream is independent of worker assignment and path count.
uint64_t path_seed(uint64_t seed, uint64_t path_index);

/// Allocation rule used in simulation: constant per state, or the
/// time-interpolated minimizer read off a solved value surface.
class Strategy {
 public:
  /// h_by_state is n_states x m_assets.
  static Strategy constant(Mat h_by_state);
  static Strategy from_surface(std::shared_ptr<const ValueSurface> surface);

  Vec at(double t, int i) const;
  bool time_varying() const { return surface_ != nullptr; }

  /// Time nodes where the allocation changes slope (empty when constant).
  const std::vector<double>& time_nodes() const;

  const ValueSurface* surface() const { return surface_.get(); }

  /// Per-state allocation matrix; meaningful only when !time_varying().
  const Mat& constant_matrix() const { return h_const_; }

 private:
  Mat h_const_;
  std::shared_ptr<const ValueSurface> surface_;
  static const std::vector<double> kNoNodes;
};

/// One simulated path: the factor trajectory, the jump marks drawn at switch
/// times, and the accumulated integrals that determine terminal log wealth
/// and the change-of-measure density.
struct PathRecord {
  std::vector<double> switch_times;  ///< strictly inside (0, T)
  std::vector<int> regimes;          ///< visited states; size = switches + 1
  std::vector<Vec> jump_marks;       ///< one per switch
  std::vector<double> brownian_draws;  ///< realized diffusion integral per segment

  double stoch_integral = 0.0;   ///< int h' sigma dW (realized)
  double quad_var = 0.0;         ///< int h' sigma sigma' h dt
  double rate_integral = 0.0;    ///< int r dt
  double excess_integral = 0.0;  ///< int h'(mu - r 1) dt
  double xi_compensator = 0.0;   ///< int sum_j h' xi(X,j) Q(X,j) dt
  double jump_log_sum = 0.0;     ///< sum log(1 + h'Z) over switches
  double chi_compensator = 0.0;  ///< int sum_j (E[(1+h'Z)^-theta] - 1) Q dt

  double log_wealth = 0.0;
  double chi = 1.0;
  double theta = 0.0;
  uint64_t seed = 0;
};

/// Simulates the factor chain on [0, horizon]: exponential holding times,
/// destination by generator row, one jump mark per switch.
void simulate_chain(const MarketModel& model, int initial_state, Rng& rng,
                    PathRecord& rec);

/// Full path: chain plus terminal log wealth with exact per-segment
/// integration (a single Gaussian draw per inter-switch segment carries the
/// diffusion integral; deterministic integrands are polynomial in t between
/// strategy nodes and are integrated exactly).
PathRecord simulate_logwealth(const MarketModel& model, const Strategy& strat,
                              int initial_state, uint64_t seed);

/// Change-of-measure density recomputed from the record's stored integrals.
double chi_density(const PathRecord& rec);

/// Generator of the factor chain under the risk-adjusted measure at fixed
/// per-state allocations: off-diagonals scaled by the jump power moments
/// E[(1 + h_i'Z)^{-theta}]. Independent of the schedule coefficients.
Mat effective_generator(const MarketModel& model, const Mat& h_by_state,
                        double theta);
Mat effective_generator(const MarketModel& model, const Mat& h_by_state);

/// sup over (t, i) of theta h'SS'h + sum_j Q(i,j) E[((1+h'Z)^-theta - 1)^2],
/// the exponential-moment rate that controls uniform integrability of the
/// density process.
double density_moment_bound(const MarketModel& model, const Mat& h_by_state);

struct McOptions {
  long n_paths = 100000;
  uint64_t seed = 0;
  int initial_state = 0;
  int threads = 0;      ///< 0 = hardware concurrency
  double k_sigma = 3.0; ///< verdict band half-width in standard errors
};

struct McReport {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  uint64_t seed = 0;
  double k_sigma = 3.0;
  bool has_target = false;
  double target = 0.0;
  bool pass = true;
  bool one_sided = false;      ///< pass means estimate <= target + k*SE
  bool has_j_theta = false;
  double j_theta = 0.0;        ///< -(1/theta) log(estimate) where meaningful
  double max_weight_share = 0.0;  ///< heavy-tail diagnostic: max value / sum
};

/// Estimates E[exp(-theta log V_T)] from initial state i0; verdict against
/// the target (typically u(0, i0)) when one is given.
McReport estimate_criterion(const MarketModel& model, const Strategy& strat,
                            const McOptions& mc,
                            std::optional<double> target = std::nullopt);

/// Estimates E[chi_T]; target 1 (the density process is a unit-mean
/// martingale for admissible strategies).
McReport verify_martingale(const MarketModel& model, const Strategy& strat,
                           const McOptions& mc);

/// Estimates E[chi_T log chi_T]; one-sided verdict against bound_total
/// (typically density_moment_bound * horizon).
McReport chi_log_chi_check(const MarketModel& model, const Strategy& strat,
                           const McOptions& mc, double bound_total);

struct GeneratorCheckEntry {
  std::string kind;  ///< "rate", "intensity", or "destination"
  int from = 0;
  int to = -1;       ///< -1 for intensity rows
  double estimate = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  bool pass = false;
};

/// Verifies the measure change on the chain by importance weighting with
/// constant per-state allocations: chi-weighted transition counts over
/// occupation times reproduce the effective generator, and the tilted
/// intensity / destination frequencies match its row decomposition.
std::vector<GeneratorCheckEntry> verify_generator_change(
    const MarketModel& model, const Mat& h_by_state, const McOptions& mc);

struct SmallThetaReport {
  double j_theta = 0.0;
  double mean_log = 0.0;
  double var_log = 0.0;
  double mean_variance_value = 0.0;  ///< E[log V] - theta/2 Var[log V]
  double difference = 0.0;
  double std_error = 0.0;  ///< delta-method SE of the difference
  long n_paths = 0;
  bool pass = false;
};

/// Checks the small-theta expansion: J_theta agrees with the mean-variance
/// value within k*SE plus an O(theta^2) allowance.
SmallThetaReport small_theta_check(const MarketModel& model,
                                   const Strategy& strat, const McOptions& mc,
                                   double allowance);

}  // namespace rsr
