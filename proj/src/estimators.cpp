#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "rsregime/simulate.hpp"
#include "sim_internal.hpp"

namespace rsr {

namespace {

// Paths are reduced in fixed blocks: each block accumulates its own sums in
// ascending path order and the block results are merged pairwise by block
// index. Workers pull whole blocks from an atomic counter, so the final sums
// are bitwise identical for any thread count.
constexpr long kBlockSize = 4096;

struct BlockOut {
  std::vector<double> sums;
  double max_abs = 0.0;
};

template <class PerPath>
std::pair<std::vector<double>, double> run_blocks(long n_paths, int threads,
                                                  std::size_t n_sums,
                                                  const PerPath& per_path) {
  const long n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
  std::vector<BlockOut> blocks(static_cast<std::size_t>(n_blocks));
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr err;

  auto worker = [&]() {
    PathRecord rec;
    detail::SimScratch scr;
    try {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const long b = next.fetch_add(1);
        if (b >= n_blocks) return;
        BlockOut& out = blocks[static_cast<std::size_t>(b)];
        out.sums.assign(n_sums, 0.0);
        const long lo = b * kBlockSize;
        const long hi = std::min(n_paths, lo + kBlockSize);
        for (long p = lo; p < hi; ++p)
          per_path(static_cast<uint64_t>(p), rec, scr, out.sums, out.max_abs);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!err) err = std::current_exception();
      failed.store(true);
    }
  };

  long n_threads = threads > 0
                       ? threads
                       : static_cast<long>(std::thread::hardware_concurrency());
  n_threads = std::clamp<long>(n_threads, 1, n_blocks);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (long t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);

  double max_abs = 0.0;
  std::vector<std::vector<double>> layer;
  layer.reserve(blocks.size());
  for (BlockOut& b : blocks) {
    layer.push_back(std::move(b.sums));
    max_abs = std::max(max_abs, b.max_abs);
  }
  while (layer.size() > 1) {
    std::vector<std::vector<double>> merged;
    merged.reserve((layer.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < layer.size(); i += 2) {
      for (std::size_t s = 0; s < n_sums; ++s) layer[i][s] += layer[i + 1][s];
      merged.push_back(std::move(layer[i]));
    }
    if (layer.size() % 2 == 1) merged.push_back(std::move(layer.back()));
    layer = std::move(merged);
  }
  if (layer.empty()) layer.emplace_back(n_sums, 0.0);
  return {std::move(layer.front()), max_abs};
}

void check_mc_inputs(const MarketModel& model, const McOptions& mc) {
  ValidationReport rep = validate_model(model);
  if (!rep.passed) throw ValidationError(rep.to_string());
  if (mc.initial_state < 0 || mc.initial_state >= model.n_states)
    throw ValidationError("mc initial_state out of range");
  if (mc.n_paths < 2) throw ValidationError("mc n_paths must be at least 2");
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(double sum, double sum_sq, long n) {
  MeanSe out;
  out.mean = sum / static_cast<double>(n);
  if (n > 1) {
    const double var =
        std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0));
    out.se = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

McReport weight_report(const MarketModel& model, const Strategy& strat,
                       const McOptions& mc, bool use_chi) {
  const detail::PathSampler sampler(model, strat);
  const double theta = model.theta;
  auto per_path = [&](uint64_t p, PathRecord& rec, detail::SimScratch& scr,
                      std::vector<double>& sums, double& max_abs) {
    sampler.sample(mc.initial_state, path_seed(mc.seed, p), rec, scr);
    const double w = use_chi ? rec.chi : std::exp(-theta * rec.log_wealth);
    sums[0] += w;
    sums[1] += w * w;
    max_abs = std::max(max_abs, w);
  };
  auto [sums, max_w] = run_blocks(mc.n_paths, mc.threads, 2, per_path);

  McReport rep;
  const MeanSe ms = mean_se(sums[0], sums[1], mc.n_paths);
  rep.estimate = ms.mean;
  rep.std_error = ms.se;
  rep.n_paths = mc.n_paths;
  rep.seed = mc.seed;
  rep.k_sigma = mc.k_sigma;
  rep.max_weight_share = sums[0] > 0.0 ? max_w / sums[0] : 0.0;
  if (!use_chi && rep.estimate > 0.0) {
    rep.has_j_theta = true;
    rep.j_theta = -std::log(rep.estimate) / theta;
  }
  return rep;
}

}  // namespace

McReport estimate_criterion(const MarketModel& model, const Strategy& strat,
                            const McOptions& mc, std::optional<double> target) {
  check_mc_inputs(model, mc);
  McReport rep = weight_report(model, strat, mc, /*use_chi=*/false);
  if (target.has_value()) {
    rep.has_target = true;
    rep.target = *target;
    rep.pass = std::abs(rep.estimate - rep.target) <= mc.k_sigma * rep.std_error;
  }
  return rep;
}

McReport verify_martingale(const MarketModel& model, const Strategy& strat,
                           const McOptions& mc) {
  check_mc_inputs(model, mc);
  McReport rep = weight_report(model, strat, mc, /*use_chi=*/true);
  rep.has_target = true;
  rep.target = 1.0;
  rep.pass = std::abs(rep.estimate - 1.0) <= mc.k_sigma * rep.std_error;
  return rep;
}

McReport chi_log_chi_check(const MarketModel& model, const Strategy& strat,
                           const McOptions& mc, double bound_total) {
  check_mc_inputs(model, mc);
  const detail::PathSampler sampler(model, strat);
  auto per_path = [&](uint64_t p, PathRecord& rec, detail::SimScratch& scr,
                      std::vector<double>& sums, double& max_abs) {
    sampler.sample(mc.initial_state, path_seed(mc.seed, p), rec, scr);
    const double y = rec.chi > 0.0 ? rec.chi * std::log(rec.chi) : 0.0;
    sums[0] += y;
    sums[1] += y * y;
    sums[2] += std::abs(y);
    max_abs = std::max(max_abs, std::abs(y));
  };
  auto [sums, max_y] = run_blocks(mc.n_paths, mc.threads, 3, per_path);

  McReport rep;
  const MeanSe ms = mean_se(sums[0], sums[1], mc.n_paths);
  rep.estimate = ms.mean;
  rep.std_error = ms.se;
  rep.n_paths = mc.n_paths;
  rep.seed = mc.seed;
  rep.k_sigma = mc.k_sigma;
  rep.has_target = true;
  rep.target = bound_total;
  rep.one_sided = true;
  rep.pass = rep.estimate <= bound_total + mc.k_sigma * rep.std_error;
  rep.max_weight_share = sums[2] > 0.0 ? max_y / sums[2] : 0.0;
  return rep;
}

std::vector<GeneratorCheckEntry> verify_generator_change(
    const MarketModel& model, const Mat& h_by_state, const McOptions& mc) {
  check_mc_inputs(model, mc);
  const Mat tilted = effective_generator(model, h_by_state, model.theta);
  const detail::PathSampler sampler(model, Strategy::constant(h_by_state));
  const int n = model.n_states;

  struct CheckDef {
    const char* kind;
    int from;
    int to;  // -1 for intensity rows
    double target;
  };
  std::vector<CheckDef> specs;
  for (int i = 0; i < n; ++i) {
    if (model.lambda(i) <= 0.0) continue;
    for (int j = 0; j < n; ++j)
      if (j != i && model.generator(i, j) > 0.0)
        specs.push_back({"rate", i, j, tilted(i, j)});
    specs.push_back({"intensity", i, -1, -tilted(i, i)});
    for (int j = 0; j < n; ++j)
      if (j != i && model.generator(i, j) > 0.0)
        specs.push_back({"destination", i, j, tilted(i, j) / -tilted(i, i)});
  }

  // Five running sums per entry: X, Y, X^2, Y^2, XY for the ratio estimator
  // R = E[chi X] / E[chi Y].
  const std::size_t n_sums = 5 * specs.size();
  auto per_path = [&](uint64_t p, PathRecord& rec, detail::SimScratch& scr,
                      std::vector<double>& sums, double& max_abs) {
    sampler.sample(mc.initial_state, path_seed(mc.seed, p), rec, scr);
    std::vector<double> occ(static_cast<std::size_t>(n), 0.0);
    std::vector<double> trans(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> exits(static_cast<std::size_t>(n), 0.0);
    const std::size_t n_switches = rec.switch_times.size();
    double prev = 0.0;
    for (std::size_t k = 0; k <= n_switches; ++k) {
      const double end =
          (k == n_switches) ? model.horizon : rec.switch_times[k];
      occ[static_cast<std::size_t>(rec.regimes[k])] += end - prev;
      prev = end;
      if (k < n_switches) {
        trans[static_cast<std::size_t>(rec.regimes[k] * n +
                                       rec.regimes[k + 1])] += 1.0;
        exits[static_cast<std::size_t>(rec.regimes[k])] += 1.0;
      }
    }
    const double chi = rec.chi;
    max_abs = std::max(max_abs, chi);
    for (std::size_t e = 0; e < specs.size(); ++e) {
      const CheckDef& s = specs[e];
      double x, y;
      if (s.kind[0] == 'r') {  // rate
        x = trans[static_cast<std::size_t>(s.from * n + s.to)];
        y = occ[static_cast<std::size_t>(s.from)];
      } else if (s.kind[0] == 'i') {  // intensity
        x = exits[static_cast<std::size_t>(s.from)];
        y = occ[static_cast<std::size_t>(s.from)];
      } else {  // destination
        x = trans[static_cast<std::size_t>(s.from * n + s.to)];
        y = exits[static_cast<std::size_t>(s.from)];
      }
      x *= chi;
      y *= chi;
      double* row = sums.data() + 5 * e;
      row[0] += x;
      row[1] += y;
      row[2] += x * x;
      row[3] += y * y;
      row[4] += x * y;
    }
  };
  auto [sums, max_chi] = run_blocks(mc.n_paths, mc.threads, n_sums, per_path);
  (void)max_chi;

  const double dn = static_cast<double>(mc.n_paths);
  std::vector<GeneratorCheckEntry> out;
  out.reserve(specs.size());
  for (std::size_t e = 0; e < specs.size(); ++e) {
    const double* row = sums.data() + 5 * e;
    GeneratorCheckEntry entry;
    entry.kind = specs[e].kind;
    entry.from = specs[e].from;
    entry.to = specs[e].to;
    entry.target = specs[e].target;
    const double mx = row[0] / dn;
    const double my = row[1] / dn;
    if (my <= 0.0) {
      entry.estimate = 0.0;
      entry.std_error = std::numeric_limits<double>::infinity();
      entry.pass = false;
    } else {
      const double ratio = mx / my;
      const double var_x = std::max(0.0, (row[2] - dn * mx * mx) / (dn - 1.0));
      const double var_y = std::max(0.0, (row[3] - dn * my * my) / (dn - 1.0));
      const double cov = (row[4] - dn * mx * my) / (dn - 1.0);
      const double se_sq =
          (var_x - 2.0 * ratio * cov + ratio * ratio * var_y) / (dn * my * my);
      entry.estimate = ratio;
      entry.std_error = std::sqrt(std::max(0.0, se_sq));
      entry.pass =
          std::abs(ratio - entry.target) <= mc.k_sigma * entry.std_error;
    }
    out.push_back(entry);
  }
  return out;
}

SmallThetaReport small_theta_check(const MarketModel& model,
                                   const Strategy& strat, const McOptions& mc,
                                   double allowance) {
  check_mc_inputs(model, mc);
  const detail::PathSampler sampler(model, strat);
  const double theta = model.theta;
  auto per_path = [&](uint64_t p, PathRecord& rec, detail::SimScratch& scr,
                      std::vector<double>& sums, double& max_abs) {
    sampler.sample(mc.initial_state, path_seed(mc.seed, p), rec, scr);
    const double lw = rec.log_wealth;
    const double w = std::exp(-theta * lw);
    const double l2 = lw * lw;
    sums[0] += w;
    sums[1] += lw;
    sums[2] += l2;
    sums[3] += w * w;
    sums[4] += w * lw;
    sums[5] += w * l2;
    sums[6] += l2 * lw;
    sums[7] += l2 * l2;
    max_abs = std::max(max_abs, w);
  };
  auto [sums, max_w] = run_blocks(mc.n_paths, mc.threads, 8, per_path);
  (void)max_w;

  const double dn = static_cast<double>(mc.n_paths);
  const double mw = sums[0] / dn;
  const double m1 = sums[1] / dn;
  const double m2 = sums[2] / dn;

  SmallThetaReport rep;
  rep.n_paths = mc.n_paths;
  rep.mean_log = m1;
  rep.var_log = std::max(0.0, m2 - m1 * m1);
  rep.j_theta = -std::log(mw) / theta;
  rep.mean_variance_value = m1 - 0.5 * theta * rep.var_log;
  rep.difference = rep.j_theta - rep.mean_variance_value;

  // Delta method on the sample means of (w, L, L^2).
  const double c_ww = (sums[3] - dn * mw * mw) / (dn - 1.0);
  const double c_w1 = (sums[4] - dn * mw * m1) / (dn - 1.0);
  const double c_w2 = (sums[5] - dn * mw * m2) / (dn - 1.0);
  const double c_11 = (sums[2] - dn * m1 * m1) / (dn - 1.0);
  const double c_12 = (sums[6] - dn * m1 * m2) / (dn - 1.0);
  const double c_22 = (sums[7] - dn * m2 * m2) / (dn - 1.0);
  const double g0 = -1.0 / (theta * mw);
  const double g1 = -1.0 - theta * m1;
  const double g2 = 0.5 * theta;
  const double var =
      g0 * g0 * c_ww + g1 * g1 * c_11 + g2 * g2 * c_22 +
      2.0 * (g0 * g1 * c_w1 + g0 * g2 * c_w2 + g1 * g2 * c_12);
  rep.std_error = std::sqrt(std::max(0.0, var) / dn);
  rep.pass =
      std::abs(rep.difference) <= mc.k_sigma * rep.std_error + allowance;
  return rep;
}

}  // namespace rsr
