#include "rsregime/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rsr {

namespace {
constexpr double kTimeTol = 1e-12;
}

void MarketModel::set_jump_law(int from, int to, JumpLaw law) {
  if (from < 0 || from >= n_states || to < 0 || to >= n_states || from == to)
    throw ValidationError("jump law indices out of range");
  if (laws_.empty()) laws_.resize(static_cast<size_t>(n_states) * n_states);
  laws_[static_cast<size_t>(from) * n_states + to] = std::move(law);
}

const JumpLaw* MarketModel::jump_law(int from, int to) const {
  if (laws_.empty()) return nullptr;
  const auto& slot = laws_[static_cast<size_t>(from) * n_states + to];
  return slot ? &*slot : nullptr;
}

int MarketModel::piece_index(int i, double t) const {
  const auto& sched = coeffs[i];
  if (t >= sched.back().t_end) return static_cast<int>(sched.size()) - 1;
  int lo = 0, hi = static_cast<int>(sched.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (t < sched[mid].t_end)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

const CoeffPiece& MarketModel::piece_at(int i, double t) const {
  return coeffs[i][piece_index(i, t)];
}

std::vector<double> MarketModel::breakpoints() const {
  std::vector<double> pts = {0.0, horizon};
  for (const auto& sched : coeffs)
    for (const CoeffPiece& p : sched) {
      pts.push_back(p.t_start);
      pts.push_back(p.t_end);
    }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double t : pts) {
    if (t < -kTimeTol || t > horizon + kTimeTol) continue;
    if (out.empty() || t - out.back() > kTimeTol) out.push_back(t);
  }
  out.front() = 0.0;
  out.back() = horizon;
  return out;
}

double MarketModel::r_min() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& sched : coeffs)
    for (const CoeffPiece& p : sched) lo = std::min(lo, p.r);
  return lo;
}

bool MarketModel::any_jumps() const {
  for (int i = 0; i < n_states; ++i)
    for (int j = 0; j < n_states; ++j) {
      const JumpLaw* law = jump_law(i, j);
      if (law && !law->is_zero()) return true;
    }
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  os << (passed ? "model valid" : "model invalid");
  for (const ValidationIssue& issue : issues)
    os << "\n  [" << issue.where << "] " << issue.message;
  return os.str();
}

ValidationReport validate_model(const MarketModel& model) {
  ValidationReport report;
  auto fail = [&report](const std::string& where, const std::string& msg) {
    report.passed = false;
    report.issues.push_back({where, msg});
  };

  if (model.n_states < 1) fail("model", "n_states must be >= 1");
  if (model.m_assets < 1) fail("model", "m_assets must be >= 1");
  if (!(model.horizon > 0.0) || !std::isfinite(model.horizon))
    fail("model", "horizon must be positive and finite");
  if (!(model.theta > 0.0) || !std::isfinite(model.theta))
    fail("model", "theta is required and must be > 0");
  if (!(model.vol_epsilon > 0.0))
    fail("model", "volatility floor epsilon must be > 0");
  if (!report.passed) return report;

  const int n = model.n_states;
  if (model.generator.rows() != n || model.generator.cols() != n) {
    fail("generator", "Q must be n_states x n_states");
    return report;
  }
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      const double q = model.generator(i, j);
      if (!std::isfinite(q)) fail("generator", "Q has a non-finite entry");
      if (i != j && q < 0.0)
        fail("generator", "off-diagonal Q(" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ") is negative");
      row += q;
    }
    if (std::abs(row) > 1e-12)
      fail("generator", "row " + std::to_string(i + 1) +
                            " does not sum to 0 (sum = " + std::to_string(row) +
                            "); rows are reported, never renormalized");
  }

  if (static_cast<int>(model.coeffs.size()) != n) {
    fail("coeffs", "need one schedule per state");
    return report;
  }
  for (int i = 0; i < n; ++i) {
    const auto& sched = model.coeffs[i];
    const std::string where = "coeffs[" + std::to_string(i + 1) + "]";
    if (sched.empty()) {
      fail(where, "schedule is empty");
      continue;
    }
    if (std::abs(sched.front().t_start) > kTimeTol)
      fail(where, "first piece must start at t = 0");
    if (std::abs(sched.back().t_end - model.horizon) > kTimeTol)
      fail(where, "last piece must end at the horizon");
    for (size_t k = 0; k < sched.size(); ++k) {
      const CoeffPiece& p = sched[k];
      if (!(p.t_end > p.t_start))
        fail(where, "piece " + std::to_string(k + 1) + " has no width");
      if (k > 0 && std::abs(p.t_start - sched[k - 1].t_end) > kTimeTol)
        fail(where, "gap or overlap before piece " + std::to_string(k + 1));
      if (p.mu.size() != model.m_assets)
        fail(where, "mu size mismatch in piece " + std::to_string(k + 1));
      if (p.sigma.rows() != model.m_assets ||
          p.sigma.cols() != model.m_assets)
        fail(where, "sigma shape mismatch in piece " + std::to_string(k + 1));
      if (!std::isfinite(p.r) || !p.mu.allFinite() || !p.sigma.allFinite()) {
        fail(where, "non-finite coefficient in piece " + std::to_string(k + 1));
        continue;
      }
      if (p.sigma.rows() == model.m_assets &&
          p.sigma.cols() == model.m_assets && p.mu.size() == model.m_assets) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(p.covariance());
        const double lo = eig.eigenvalues().minCoeff();
        if (lo < model.vol_epsilon)
          fail(where, "sigma*sigma' minimum eigenvalue " + std::to_string(lo) +
                          " below floor in piece " + std::to_string(k + 1));
      }
    }
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const JumpLaw* law = model.jump_law(i, j);
      if (!law) continue;
      const std::string where =
          "jump_laws[" + std::to_string(i + 1) + "->" + std::to_string(j + 1) +
          "]";
      if (law->dim() != model.m_assets)
        fail(where, "atom dimension differs from m_assets");
      // Atom-level constraints (z > -1, masses) hold by JumpLaw construction.
    }

  return report;
}

AdmissibleSet::AdmissibleSet(int state, std::vector<Vec> constraints)
    : state_(state), constraints_(std::move(constraints)) {}

double AdmissibleSet::min_gap(const Vec& h) const {
  double lo = std::numeric_limits<double>::infinity();
  for (const Vec& z : constraints_) lo = std::min(lo, 1.0 + h.dot(z));
  return lo;
}

std::pair<double, double> AdmissibleSet::bounds_1d() const {
  if (!constraints_.empty() && constraints_.front().size() != 1)
    throw ValidationError("bounds_1d needs a single-asset set");
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const Vec& z : constraints_) {
    const double v = z[0];
    if (v > 0.0) lo = std::max(lo, -1.0 / v);
    if (v < 0.0) hi = std::min(hi, -1.0 / v);
  }
  return {lo, hi};
}

AdmissibleSet admissible_set(const MarketModel& model, int i) {
  if (i < 0 || i >= model.n_states)
    throw ValidationError("state index out of range");
  std::vector<Vec> constraints;
  for (int j = 0; j < model.n_states; ++j) {
    if (j == i) continue;
    const JumpLaw* law = model.jump_law(i, j);
    if (!law) continue;
    for (const JumpAtom& a : law->atoms())
      if (a.z.lpNorm<Eigen::Infinity>() > 0.0) constraints.push_back(a.z);
  }
  return AdmissibleSet(i, std::move(constraints));
}

}  // namespace rsr
