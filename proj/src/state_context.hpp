#pragma once

// Internal per-(state, time) view of the model used by the minimizers and
// simulators: resolved coefficients, jump terms with positive intensity, and
// the feasibility constraints of the state's admissible set.

#include <vector>

#include "rsregime/market_model.hpp"

namespace rsr::detail {

struct FeasibilityAtoms {
  std::vector<Vec> z;

  double min_gap(const Vec& h) const {
    double lo = std::numeric_limits<double>::infinity();
    for (const Vec& zi : z) lo = std::min(lo, 1.0 + h.dot(zi));
    return lo;
  }

  // Largest step length along d keeping min(1 + h'z) >= margin.
  double max_step(const Vec& h, const Vec& d, double margin) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (const Vec& zi : z) {
      const double slope = d.dot(zi);
      if (slope < 0.0) {
        const double gap = 1.0 + h.dot(zi) - margin;
        alpha = std::min(alpha, gap > 0.0 ? gap / -slope : 0.0);
      }
    }
    return alpha;
  }
};

struct StateContext {
  int state = 0;
  double theta = 0.0;
  double r = 0.0;
  Vec mu;
  Vec excess;   // mu - r*1
  Vec b;        // mu - r*1 - sum_j q_ij * xi(i,j)
  Mat S;        // sigma * sigma'
  double q_total = 0.0;

  struct Jump {
    int to;
    double q;
    const JumpLaw* law;
  };
  std::vector<Jump> jumps;  // transitions with q_ij > 0
  FeasibilityAtoms feas;    // all declared laws out of the state
};

inline StateContext make_state_context(const MarketModel& model, int i,
                                       double t) {
  StateContext ctx;
  ctx.state = i;
  ctx.theta = model.theta;
  const CoeffPiece& piece = model.piece_at(i, t);
  ctx.r = piece.r;
  ctx.mu = piece.mu;
  ctx.excess = piece.mu - Vec::Constant(model.m_assets, piece.r);
  ctx.S = piece.covariance();
  ctx.b = ctx.excess;
  for (int j = 0; j < model.n_states; ++j) {
    if (j == i) continue;
    const double q = model.generator(i, j);
    const JumpLaw* law = model.jump_law(i, j);
    if (q > 0.0) {
      ctx.q_total += q;
      ctx.jumps.push_back({j, q, law});
      if (law) ctx.b -= q * law->mean();
    }
    if (law)
      for (const JumpAtom& a : law->atoms())
        if (a.z.lpNorm<Eigen::Infinity>() > 0.0) ctx.feas.z.push_back(a.z);
  }
  return ctx;
}

}  // namespace rsr::detail
