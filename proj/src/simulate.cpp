#include "rsregime/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sim_internal.hpp"

namespace rsr {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  constexpr double kTwoPi = 6.283185307179586476925287;
  const double angle = kTwoPi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t path_seed(uint64_t seed, uint64_t path_index) {
  return splitmix64(seed ^ splitmix64(path_index + 0x632be59bd9b4e019ULL));
}

const std::vector<double> Strategy::kNoNodes{};

Strategy Strategy::constant(Mat h_by_state) {
  if (h_by_state.rows() < 1 || h_by_state.cols() < 1)
    throw ValidationError("constant strategy needs an n_states x m_assets matrix");
  Strategy s;
  s.h_const_ = std::move(h_by_state);
  return s;
}

Strategy Strategy::from_surface(std::shared_ptr<const ValueSurface> surface) {
  if (!surface) throw ValidationError("strategy surface is null");
  if (surface->n_times() < 2)
    throw ValidationError("strategy surface needs at least two time nodes");
  Strategy s;
  s.surface_ = std::move(surface);
  return s;
}

Vec Strategy::at(double t, int i) const {
  if (surface_) {
    if (i < 0 || i >= surface_->n_states)
      throw ValidationError("strategy state index out of range");
    return surface_->h_interp(t, i);
  }
  if (i < 0 || i >= h_const_.rows())
    throw ValidationError("strategy state index out of range");
  return h_const_.row(i).transpose();
}

const std::vector<double>& Strategy::time_nodes() const {
  return surface_ ? surface_->times : kNoNodes;
}

namespace detail {

PathSampler::PathSampler(const MarketModel& model, Strategy strat)
    : model_(&model), strat_(std::move(strat)) {
  horizon_ = model.horizon;
  theta_ = model.theta;
  m_ = model.m_assets;
  const int n = model.n_states;

  if (strat_.time_varying()) {
    const ValueSurface* s = strat_.surface();
    if (s->n_states != n || s->m_assets != m_ ||
        std::abs(s->horizon - horizon_) > 1e-9 * std::max(1.0, horizon_))
      throw ValidationError("strategy surface does not match the model");
  } else {
    const Mat& hc = strat_.constant_matrix();
    if (hc.rows() != n || hc.cols() != m_)
      throw ValidationError("constant strategy must be n_states x m_assets");
  }

  lambda_.resize(n);
  dests_.resize(n);
  xi_weighted_.assign(n, Vec::Zero(m_));
  chi_terms_.resize(n);
  piece_coeffs_.resize(n);
  for (int i = 0; i < n; ++i) {
    lambda_[i] = model.lambda(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double q = model.generator(i, j);
      if (q <= 0.0) continue;
      const JumpLaw* law = model.jump_law(i, j);
      dests_[i].push_back({j, q / lambda_[i], law});
      if (law && !law->is_zero()) {
        xi_weighted_[i] += q * law->mean();
        chi_terms_[i].push_back({q, law});
      }
    }
    for (const CoeffPiece& pc : model.coeffs[i])
      piece_coeffs_[i].push_back(
          {pc.covariance(), (pc.mu.array() - pc.r).matrix(), pc.r});
  }

  cuts_ = model.breakpoints();
  if (strat_.time_varying()) {
    const auto& nodes = strat_.time_nodes();
    cuts_.insert(cuts_.end(), nodes.begin(), nodes.end());
    std::sort(cuts_.begin(), cuts_.end());
    cuts_.erase(std::unique(cuts_.begin(), cuts_.end()), cuts_.end());
    cuts_.erase(std::remove_if(cuts_.begin(), cuts_.end(),
                               [&](double c) { return c < 0.0 || c > horizon_; }),
                cuts_.end());
  }

  const std::size_t n_cut = cuts_.size() - 1;
  piece_of_cut_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    piece_of_cut_[i].resize(n_cut);
    for (std::size_t c = 0; c < n_cut; ++c)
      piece_of_cut_[i][c] = model.piece_index(i, 0.5 * (cuts_[c] + cuts_[c + 1]));
  }
  if (strat_.time_varying()) {
    const auto& st = strat_.time_nodes();
    const int last = static_cast<int>(st.size()) - 2;
    surf_node_of_cut_.resize(n_cut);
    for (std::size_t c = 0; c < n_cut; ++c) {
      const double mid = 0.5 * (cuts_[c] + cuts_[c + 1]);
      int k = static_cast<int>(std::upper_bound(st.begin(), st.end(), mid) -
                               st.begin()) -
              1;
      surf_node_of_cut_[c] = std::clamp(k, 0, last);
    }
  } else {
    // Per-state constants make the elementary-segment work pure arithmetic.
    h_rows_.resize(n);
    exc_dot_.resize(n);
    hsh_.resize(n);
    xi_dot_.resize(n);
    chi_rate_.resize(n);
    for (int i = 0; i < n; ++i) {
      h_rows_[i] = strat_.constant_matrix().row(i).transpose();
      for (const Destination& d : dests_[i])
        if (d.law && !d.law->feasible(h_rows_[i]))
          throw FeasibilityError(
              "constant allocation of state " + std::to_string(i + 1) +
              " is infeasible for the jump law toward state " +
              std::to_string(d.to + 1));
      const std::size_t np = piece_coeffs_[i].size();
      exc_dot_[i].resize(np);
      hsh_[i].resize(np);
      for (std::size_t p = 0; p < np; ++p) {
        exc_dot_[i][p] = h_rows_[i].dot(piece_coeffs_[i][p].excess);
        hsh_[i][p] = h_rows_[i].dot(piece_coeffs_[i][p].S * h_rows_[i]);
      }
      xi_dot_[i] = h_rows_[i].dot(xi_weighted_[i]);
      chi_rate_[i] = chi_rate_at(h_rows_[i], i);
    }
  }
}

double PathSampler::chi_rate_at(const Vec& h, int state) const {
  double s = 0.0;
  for (const ChiTerm& term : chi_terms_[state])
    s += term.q * (term.law->power_integral(h, theta_) - 1.0);
  return s;
}

void PathSampler::h_lerp(double t, int state, std::size_t cut, Vec& out) const {
  const auto& st = strat_.time_nodes();
  const int k = surf_node_of_cut_[cut];
  const double dt = st[k + 1] - st[k];
  double w = dt > 0.0 ? (t - st[k]) / dt : 0.0;
  w = std::clamp(w, 0.0, 1.0);
  const ValueSurface& s = *strat_.surface();
  out.noalias() = (1.0 - w) * s.h[k].row(state).transpose() +
                  w * s.h[k + 1].row(state).transpose();
}

void PathSampler::walk_chain(int initial_state, Rng& rng,
                             PathRecord& rec) const {
  rec.switch_times.clear();
  rec.regimes.clear();
  rec.jump_marks.clear();
  rec.regimes.push_back(initial_state);

  double t = 0.0;
  int i = initial_state;
  for (;;) {
    const double lam = lambda_[i];
    if (lam <= 0.0 || dests_[i].empty()) break;  // absorbing
    t += rng.exponential(lam);
    if (t >= horizon_) break;

    const double u = rng.uniform01();
    const Destination* dest = &dests_[i].back();
    double cum = 0.0;
    for (const Destination& d : dests_[i]) {
      cum += d.prob;
      if (u < cum) {
        dest = &d;
        break;
      }
    }

    Vec mark;
    const JumpLaw* law = dest->law;
    if (law == nullptr || law->is_zero()) {
      mark = Vec::Zero(m_);
    } else if (law->atoms().size() == 1) {
      mark = law->atoms().front().z;
    } else {
      const double v = rng.uniform01();
      const auto& atoms = law->atoms();
      mark = atoms.back().z;
      double cp = 0.0;
      for (const JumpAtom& a : atoms) {
        cp += a.p;
        if (v < cp) {
          mark = a.z;
          break;
        }
      }
    }

    rec.switch_times.push_back(t);
    rec.regimes.push_back(dest->to);
    rec.jump_marks.push_back(std::move(mark));
    i = dest->to;
  }
}

void PathSampler::integrate_segment(double a, double b, int state,
                                    std::size_t cut, Rng& rng, PathRecord& rec,
                                    SimScratch& scr) const {
  const double len = b - a;
  if (!(len > 0.0)) return;
  const int piece = piece_of_cut_[state][cut];
  const SegCoeffs& sc = piece_coeffs_[state][piece];

  double e_int, qv_int, xi_int, chi_int;
  if (!strat_.time_varying()) {
    e_int = exc_dot_[state][piece] * len;
    qv_int = hsh_[state][piece] * len;
    xi_int = xi_dot_[state] * len;
    chi_int = chi_rate_[state] * len;
  } else {
    h_lerp(a, state, cut, scr.ha);
    h_lerp(0.5 * (a + b), state, cut, scr.hm);
    h_lerp(b, state, cut, scr.hb);
    const double w6 = len / 6.0;
    e_int = w6 * (scr.ha.dot(sc.excess) + 4.0 * scr.hm.dot(sc.excess) +
                  scr.hb.dot(sc.excess));
    scr.tmp.noalias() = sc.S * scr.ha;
    double qf = scr.ha.dot(scr.tmp);
    scr.tmp.noalias() = sc.S * scr.hm;
    qf += 4.0 * scr.hm.dot(scr.tmp);
    scr.tmp.noalias() = sc.S * scr.hb;
    qf += scr.hb.dot(scr.tmp);
    qv_int = w6 * qf;
    xi_int = w6 * (scr.ha.dot(xi_weighted_[state]) +
                   4.0 * scr.hm.dot(xi_weighted_[state]) +
                   scr.hb.dot(xi_weighted_[state]));
    chi_int = w6 * (chi_rate_at(scr.ha, state) +
                    4.0 * chi_rate_at(scr.hm, state) +
                    chi_rate_at(scr.hb, state));
  }

  rec.rate_integral += sc.r * len;
  rec.excess_integral += e_int;
  rec.quad_var += qv_int;
  rec.xi_compensator += xi_int;
  rec.chi_compensator += chi_int;

  const double draw = std::sqrt(std::max(qv_int, 0.0)) * rng.normal();
  rec.stoch_integral += draw;
  rec.brownian_draws.push_back(draw);
}

void PathSampler::sample(int initial_state, uint64_t seed, PathRecord& rec,
                         SimScratch& scr) const {
  rec.brownian_draws.clear();
  rec.stoch_integral = 0.0;
  rec.quad_var = 0.0;
  rec.rate_integral = 0.0;
  rec.excess_integral = 0.0;
  rec.xi_compensator = 0.0;
  rec.jump_log_sum = 0.0;
  rec.chi_compensator = 0.0;
  rec.theta = theta_;
  rec.seed = seed;
  scr.ha.resize(m_);
  scr.hm.resize(m_);
  scr.hb.resize(m_);
  scr.tmp.resize(m_);

  Rng rng(seed);
  walk_chain(initial_state, rng, rec);

  const std::size_t n_switches = rec.switch_times.size();
  const std::size_t n_cut = cuts_.size() - 1;
  std::size_t ci = 0;
  double t0 = 0.0;
  for (std::size_t k = 0; k <= n_switches; ++k) {
    const double b = (k == n_switches) ? horizon_ : rec.switch_times[k];
    const int i = rec.regimes[k];
    while (t0 < b) {
      while (ci + 1 < n_cut && cuts_[ci + 1] <= t0) ++ci;
      const double t1 = std::min(b, cuts_[ci + 1]);
      integrate_segment(t0, t1, i, ci, rng, rec, scr);
      t0 = t1;
    }
    if (k < n_switches) {
      // Wealth jumps with the allocation held just before the switch.
      const Vec& z = rec.jump_marks[k];
      double dot;
      if (!strat_.time_varying()) {
        dot = h_rows_[i].dot(z);
      } else {
        h_lerp(b, i, ci, scr.ha);
        dot = scr.ha.dot(z);
      }
      if (!(1.0 + dot > 0.0))
        throw FeasibilityError(
            "allocation is infeasible for a realized jump (1 + h'z <= 0) at t=" +
            std::to_string(b));
      rec.jump_log_sum += std::log1p(dot);
    }
  }

  rec.log_wealth = rec.rate_integral + rec.excess_integral -
                   rec.xi_compensator - 0.5 * rec.quad_var +
                   rec.stoch_integral + rec.jump_log_sum;
  rec.chi = chi_density(rec);
}

}  // namespace detail

namespace {

void require_valid(const MarketModel& model) {
  ValidationReport rep = validate_model(model);
  if (!rep.passed) throw ValidationError(rep.to_string());
}

void require_state(const MarketModel& model, int i) {
  if (i < 0 || i >= model.n_states)
    throw ValidationError("initial state out of range");
}

}  // namespace

void simulate_chain(const MarketModel& model, int initial_state, Rng& rng,
                    PathRecord& rec) {
  require_valid(model);
  require_state(model, initial_state);
  detail::PathSampler sampler(
      model, Strategy::constant(Mat::Zero(model.n_states, model.m_assets)));
  sampler.walk_chain(initial_state, rng, rec);
}

PathRecord simulate_logwealth(const MarketModel& model, const Strategy& strat,
                              int initial_state, uint64_t seed) {
  require_valid(model);
  require_state(model, initial_state);
  detail::PathSampler sampler(model, strat);
  PathRecord rec;
  detail::SimScratch scr;
  sampler.sample(initial_state, seed, rec, scr);
  return rec;
}

double chi_density(const PathRecord& rec) {
  return std::exp(-rec.theta * rec.stoch_integral -
                  0.5 * rec.theta * rec.theta * rec.quad_var -
                  rec.theta * rec.jump_log_sum - rec.chi_compensator);
}

Mat effective_generator(const MarketModel& model, const Mat& h_by_state,
                        double theta) {
  if (h_by_state.rows() != model.n_states ||
      h_by_state.cols() != model.m_assets)
    throw ValidationError("allocation matrix must be n_states x m_assets");
  const int n = model.n_states;
  Mat tilted = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec h = h_by_state.row(i).transpose();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double q = model.generator(i, j);
      if (q <= 0.0) continue;
      const JumpLaw* law = model.jump_law(i, j);
      const double pi =
          (law && !law->is_zero()) ? law->power_integral(h, theta) : 1.0;
      tilted(i, j) = q * pi;
    }
    tilted(i, i) = -tilted.row(i).sum();
  }
  return tilted;
}

Mat effective_generator(const MarketModel& model, const Mat& h_by_state) {
  return effective_generator(model, h_by_state, model.theta);
}

double density_moment_bound(const MarketModel& model, const Mat& h_by_state) {
  if (h_by_state.rows() != model.n_states ||
      h_by_state.cols() != model.m_assets)
    throw ValidationError("allocation matrix must be n_states x m_assets");
  const double theta = model.theta;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < model.n_states; ++i) {
    const Vec h = h_by_state.row(i).transpose();
    double jump_part = 0.0;
    for (int j = 0; j < model.n_states; ++j) {
      if (j == i) continue;
      const double q = model.generator(i, j);
      if (q <= 0.0) continue;
      const JumpLaw* law = model.jump_law(i, j);
      if (law == nullptr || law->is_zero()) continue;
      // E[((1+h'Z)^-theta - 1)^2] expanded into two power moments.
      jump_part += q * (law->power_integral(h, 2.0 * theta) -
                        2.0 * law->power_integral(h, theta) + 1.0);
    }
    for (const CoeffPiece& pc : model.coeffs[i]) {
      const double diff = theta * h.dot(pc.covariance() * h);
      best = std::max(best, diff + jump_part);
    }
  }
  return best;
}

}  // namespace rsr
