#include "rsregime.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "json.hpp"
#include "rsregime/hjb.hpp"
#include "rsregime/market_model.hpp"
#include "rsregime/model_json.hpp"
#include "rsregime/simulate.hpp"
#include "rsregime/strategies.hpp"

struct rsr_model {
  rsr::MarketModel impl;
};

struct rsr_surface {
  std::shared_ptr<const rsr::ValueSurface> impl;
};

namespace {

thread_local std::string g_last_error;

rsr_status fail(rsr_status status, const char* message) {
  g_last_error = message;
  return status;
}

rsr_status from_current_exception() {
  try {
    throw;
  } catch (const rsr::ValidationError& e) {
    g_last_error = e.what();
    return RSR_EVALIDATION;
  } catch (const rsr::FeasibilityError& e) {
    g_last_error = e.what();
    return RSR_EVALIDATION;
  } catch (const rsr::SolverError& e) {
    g_last_error = e.what();
    return RSR_ENUMERIC;
  } catch (const rsr::IoError& e) {
    g_last_error = e.what();
    return RSR_EIO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RSR_EINTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RSR_EINTERNAL;
  }
}

template <class Body>
rsr_status guarded(Body&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (...) {
    return from_current_exception();
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

rsr::SolveOptions to_solve_options(const rsr_solve_options* opts) {
  rsr::SolveOptions out;
  if (opts == nullptr) return out;
  out.n_steps = opts->n_steps;
  out.minimize.grad_tol = opts->grad_tol;
  out.minimize.max_iter = opts->max_iter;
  out.minimize.feasibility_margin = opts->feasibility_margin;
  out.ode_tol = opts->ode_tol;
  out.step_doubling = opts->step_doubling != 0;
  return out;
}

rsr::McOptions to_mc_options(const rsr_mc_options* mc) {
  rsr::McOptions out;
  if (mc == nullptr) return out;
  out.n_paths = static_cast<long>(mc->n_paths);
  out.seed = mc->seed;
  out.initial_state = mc->initial_state;
  out.threads = mc->threads;
  out.k_sigma = mc->k_sigma;
  return out;
}

rsr::Mat map_row_major(const double* data, int rows, int cols) {
  return Eigen::Map<
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor>>(data, rows, cols);
}

// Exactly one of (surface, h_by_state) selects the simulated strategy.
rsr::Strategy make_strategy(const rsr_model* model, const rsr_surface* surface,
                            const double* h_by_state) {
  if (surface != nullptr)
    return rsr::Strategy::from_surface(surface->impl);
  return rsr::Strategy::constant(
      map_row_major(h_by_state, model->impl.n_states, model->impl.m_assets));
}

void fill_report(const rsr::McReport& in, rsr_mc_report* out) {
  out->estimate = in.estimate;
  out->std_error = in.std_error;
  out->n_paths = in.n_paths;
  out->seed = in.seed;
  out->k_sigma = in.k_sigma;
  out->has_target = in.has_target ? 1 : 0;
  out->target = in.target;
  out->pass = in.pass ? 1 : 0;
  out->one_sided = in.one_sided ? 1 : 0;
  out->has_j_theta = in.has_j_theta ? 1 : 0;
  out->j_theta = in.j_theta;
  out->max_weight_share = in.max_weight_share;
}

bool surface_node_ok(const rsr_surface* surface, int k, int state) {
  return k >= 0 && k < surface->impl->n_times() && state >= 0 &&
         state < surface->impl->n_states;
}

}  // namespace

extern "C" {

const char* rsr_version(void) { return "0.1.0"; }

const char* rsr_last_error(void) { return g_last_error.c_str(); }

void rsr_free_string(char* s) { std::free(s); }

rsr_status rsr_model_load(const char* path, rsr_model** out) {
  if (path == nullptr || out == nullptr)
    return fail(RSR_EINVAL, "rsr_model_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<rsr_model>();
    handle->impl = rsr::load_model(path);
    *out = handle.release();
    return RSR_OK;
  });
}

rsr_status rsr_model_parse(const char* json_text, rsr_model** out) {
  if (json_text == nullptr || out == nullptr)
    return fail(RSR_EINVAL, "rsr_model_parse: null argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<rsr_model>();
    handle->impl = rsr::model_from_json_text(json_text);
    *out = handle.release();
    return RSR_OK;
  });
}

void rsr_model_free(rsr_model* model) { delete model; }

rsr_status rsr_model_validate(const rsr_model* model, int* passed,
                              char** report_json) {
  if (model == nullptr || passed == nullptr)
    return fail(RSR_EINVAL, "rsr_model_validate: null argument");
  return guarded([&] {
    const rsr::ValidationReport rep = rsr::validate_model(model->impl);
    *passed = rep.passed ? 1 : 0;
    if (report_json != nullptr) {
      nlohmann::json j;
      j["passed"] = rep.passed;
      nlohmann::json issues = nlohmann::json::array();
      for (const rsr::ValidationIssue& issue : rep.issues)
        issues.push_back({{"where", issue.where}, {"message", issue.message}});
      j["issues"] = std::move(issues);
      *report_json = dup_string(j.dump(2));
    }
    return RSR_OK;
  });
}

int rsr_model_n_states(const rsr_model* model) {
  return model != nullptr ? model->impl.n_states : 0;
}

int rsr_model_m_assets(const rsr_model* model) {
  return model != nullptr ? model->impl.m_assets : 0;
}

double rsr_model_horizon(const rsr_model* model) {
  return model != nullptr ? model->impl.horizon : 0.0;
}

double rsr_model_theta(const rsr_model* model) {
  return model != nullptr ? model->impl.theta : 0.0;
}

rsr_status rsr_model_generator(const rsr_model* model, double* q_out) {
  if (model == nullptr || q_out == nullptr)
    return fail(RSR_EINVAL, "rsr_model_generator: null argument");
  const int n = model->impl.n_states;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q_out[i * n + j] = model->impl.generator(i, j);
  g_last_error.clear();
  return RSR_OK;
}

int rsr_model_has_jump_law(const rsr_model* model, int from, int to) {
  if (model == nullptr || from < 0 || from >= model->impl.n_states || to < 0 ||
      to >= model->impl.n_states)
    return 0;
  return model->impl.jump_law(from, to) != nullptr ? 1 : 0;
}

void rsr_solve_options_init(rsr_solve_options* opts) {
  if (opts == nullptr) return;
  const rsr::SolveOptions def;
  opts->n_steps = def.n_steps;
  opts->grad_tol = def.minimize.grad_tol;
  opts->max_iter = def.minimize.max_iter;
  opts->feasibility_margin = def.minimize.feasibility_margin;
  opts->ode_tol = def.ode_tol;
  opts->step_doubling = def.step_doubling ? 1 : 0;
}

static rsr_status solve_impl(const rsr_model* model,
                             const rsr_solve_options* opts, rsr_surface** out,
                             bool independent) {
  if (model == nullptr || out == nullptr)
    return fail(RSR_EINVAL, "rsr_solve: null argument");
  *out = nullptr;
  return guarded([&] {
    rsr::SolveOptions so = to_solve_options(opts);
    so.independent_variant = independent;
    auto handle = std::make_unique<rsr_surface>();
    handle->impl = std::make_shared<const rsr::ValueSurface>(
        rsr::solve_hjb(model->impl, so));
    *out = handle.release();
    return RSR_OK;
  });
}

rsr_status rsr_solve(const rsr_model* model, const rsr_solve_options* opts,
                     rsr_surface** out) {
  return solve_impl(model, opts, out, false);
}

rsr_status rsr_solve_independent_jumps(const rsr_model* model,
                                       const rsr_solve_options* opts,
                                       rsr_surface** out) {
  return solve_impl(model, opts, out, true);
}

void rsr_surface_free(rsr_surface* surface) { delete surface; }

rsr_status rsr_surface_dims(const rsr_surface* surface, int* n_times,
                            int* n_states, int* m_assets) {
  if (surface == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_dims: null surface");
  if (n_times != nullptr) *n_times = surface->impl->n_times();
  if (n_states != nullptr) *n_states = surface->impl->n_states;
  if (m_assets != nullptr) *m_assets = surface->impl->m_assets;
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_info(const rsr_surface* surface, double* horizon,
                            double* theta, double* ode_error_estimate) {
  if (surface == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_info: null surface");
  if (horizon != nullptr) *horizon = surface->impl->horizon;
  if (theta != nullptr) *theta = surface->impl->theta;
  if (ode_error_estimate != nullptr)
    *ode_error_estimate = surface->impl->ode_error_estimate;
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_time(const rsr_surface* surface, int k, double* t) {
  if (surface == nullptr || t == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_time: null argument");
  if (k < 0 || k >= surface->impl->n_times())
    return fail(RSR_EINVAL, "rsr_surface_time: node index out of range");
  *t = surface->impl->times[static_cast<std::size_t>(k)];
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_u(const rsr_surface* surface, int k, int state,
                         double* u) {
  if (surface == nullptr || u == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_u: null argument");
  if (!surface_node_ok(surface, k, state))
    return fail(RSR_EINVAL, "rsr_surface_u: index out of range");
  *u = surface->impl->u(k, state);
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_v(const rsr_surface* surface, int k, int state,
                         double* v) {
  if (surface == nullptr || v == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_v: null argument");
  if (!surface_node_ok(surface, k, state))
    return fail(RSR_EINVAL, "rsr_surface_v: index out of range");
  *v = surface->impl->v(k, state);
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_h(const rsr_surface* surface, int k, int state,
                         double* h_out) {
  if (surface == nullptr || h_out == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_h: null argument");
  if (!surface_node_ok(surface, k, state))
    return fail(RSR_EINVAL, "rsr_surface_h: index out of range");
  const rsr::Mat& node = surface->impl->h[static_cast<std::size_t>(k)];
  for (int a = 0; a < surface->impl->m_assets; ++a) h_out[a] = node(state, a);
  g_last_error.clear();
  return RSR_OK;
}

rsr_status rsr_surface_warnings(const rsr_surface* surface, char** json_out) {
  if (surface == nullptr || json_out == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_warnings: null argument");
  return guarded([&] {
    const nlohmann::json j = surface->impl->warnings;
    *json_out = dup_string(j.dump(2));
    return RSR_OK;
  });
}

rsr_status rsr_surface_save_csv(const rsr_surface* surface, const char* path) {
  if (surface == nullptr || path == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_save_csv: null argument");
  return guarded([&] {
    rsr::save_surface_csv(*surface->impl, path);
    return RSR_OK;
  });
}

rsr_status rsr_surface_save_json(const rsr_surface* surface,
                                 const char* path) {
  if (surface == nullptr || path == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_save_json: null argument");
  return guarded([&] {
    rsr::save_surface_json(*surface->impl, path);
    return RSR_OK;
  });
}

rsr_status rsr_surface_load_json(const char* path, rsr_surface** out) {
  if (path == nullptr || out == nullptr)
    return fail(RSR_EINVAL, "rsr_surface_load_json: null argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<rsr_surface>();
    handle->impl = std::make_shared<const rsr::ValueSurface>(
        rsr::load_surface_json(path));
    *out = handle.release();
    return RSR_OK;
  });
}

rsr_status rsr_closed_form_no_jump(const rsr_model* model, double t,
                                   double* u_out, double* v_out) {
  if (model == nullptr)
    return fail(RSR_EINVAL, "rsr_closed_form_no_jump: null model");
  return guarded([&] {
    const rsr::ClosedFormResult res =
        rsr::closed_form_no_jump(model->impl, t);
    for (int i = 0; i < model->impl.n_states; ++i) {
      if (u_out != nullptr) u_out[i] = res.u(i);
      if (v_out != nullptr) v_out[i] = res.v(i);
    }
    return RSR_OK;
  });
}

rsr_status rsr_kelly_allocation(const rsr_model* model, double t, int state,
                                double* h_out, double* objective,
                                double* residual) {
  if (model == nullptr || h_out == nullptr)
    return fail(RSR_EINVAL, "rsr_kelly_allocation: null argument");
  return guarded([&] {
    const rsr::KellyResult res = rsr::kelly_allocation(model->impl, t, state);
    for (int a = 0; a < model->impl.m_assets; ++a) h_out[a] = res.h(a);
    if (objective != nullptr) *objective = res.objective;
    if (residual != nullptr) *residual = res.residual;
    return RSR_OK;
  });
}

rsr_status rsr_fixed_point_residual(const rsr_model* model, double t,
                                    int state, const double* h,
                                    const double* u, double* residual) {
  if (model == nullptr || h == nullptr || u == nullptr || residual == nullptr)
    return fail(RSR_EINVAL, "rsr_fixed_point_residual: null argument");
  return guarded([&] {
    const rsr::Vec hv =
        Eigen::Map<const rsr::Vec>(h, model->impl.m_assets);
    const rsr::Vec uv =
        Eigen::Map<const rsr::Vec>(u, model->impl.n_states);
    *residual = rsr::fixed_point_residual(model->impl, t, state, hv, uv,
                                          model->impl.theta);
    return RSR_OK;
  });
}

rsr_status rsr_mutual_fund_split(double theta, int m_assets,
                                 const double* h_star, const double* h_kelly,
                                 double* h_tilde_out) {
  if (h_star == nullptr || h_kelly == nullptr || h_tilde_out == nullptr)
    return fail(RSR_EINVAL, "rsr_mutual_fund_split: null argument");
  if (m_assets < 1)
    return fail(RSR_EINVAL, "rsr_mutual_fund_split: m_assets must be >= 1");
  return guarded([&] {
    const rsr::Vec hs = Eigen::Map<const rsr::Vec>(h_star, m_assets);
    const rsr::Vec hk = Eigen::Map<const rsr::Vec>(h_kelly, m_assets);
    const rsr::Vec ht = rsr::mutual_fund_split(hs, hk, theta);
    for (int a = 0; a < m_assets; ++a) h_tilde_out[a] = ht(a);
    return RSR_OK;
  });
}

rsr_status rsr_effective_generator(const rsr_model* model,
                                   const double* h_by_state, double theta,
                                   double* q_out) {
  if (model == nullptr || h_by_state == nullptr || q_out == nullptr)
    return fail(RSR_EINVAL, "rsr_effective_generator: null argument");
  return guarded([&] {
    const int n = model->impl.n_states;
    const rsr::Mat tilted = rsr::effective_generator(
        model->impl, map_row_major(h_by_state, n, model->impl.m_assets),
        theta);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) q_out[i * n + j] = tilted(i, j);
    return RSR_OK;
  });
}

rsr_status rsr_density_moment_bound(const rsr_model* model, const double* h_by_state,
                              double* bound) {
  if (model == nullptr || h_by_state == nullptr || bound == nullptr)
    return fail(RSR_EINVAL, "rsr_density_moment_bound: null argument");
  return guarded([&] {
    *bound = rsr::density_moment_bound(
        model->impl, map_row_major(h_by_state, model->impl.n_states,
                                   model->impl.m_assets));
    return RSR_OK;
  });
}

void rsr_mc_options_init(rsr_mc_options* opts) {
  if (opts == nullptr) return;
  const rsr::McOptions def;
  opts->n_paths = def.n_paths;
  opts->seed = def.seed;
  opts->initial_state = def.initial_state;
  opts->threads = def.threads;
  opts->k_sigma = def.k_sigma;
}

static rsr_status check_strategy_args(const rsr_model* model,
                                      const rsr_surface* surface,
                                      const double* h_by_state,
                                      const rsr_mc_options* mc,
                                      const void* out) {
  if (model == nullptr || mc == nullptr || out == nullptr)
    return fail(RSR_EINVAL, "null argument");
  if ((surface != nullptr) == (h_by_state != nullptr))
    return fail(RSR_EINVAL,
                "exactly one of strategy_surface and h_by_state must be set");
  return RSR_OK;
}

rsr_status rsr_estimate_criterion(const rsr_model* model,
                                  const rsr_surface* strategy_surface,
                                  const double* h_by_state,
                                  const rsr_mc_options* mc,
                                  const double* target, rsr_mc_report* out) {
  const rsr_status bad =
      check_strategy_args(model, strategy_surface, h_by_state, mc, out);
  if (bad != RSR_OK) return bad;
  return guarded([&] {
    const rsr::Strategy strat =
        make_strategy(model, strategy_surface, h_by_state);
    std::optional<double> tgt;
    if (target != nullptr) tgt = *target;
    fill_report(
        rsr::estimate_criterion(model->impl, strat, to_mc_options(mc), tgt),
        out);
    return RSR_OK;
  });
}

rsr_status rsr_verify_martingale(const rsr_model* model,
                                 const rsr_surface* strategy_surface,
                                 const double* h_by_state,
                                 const rsr_mc_options* mc,
                                 rsr_mc_report* out) {
  const rsr_status bad =
      check_strategy_args(model, strategy_surface, h_by_state, mc, out);
  if (bad != RSR_OK) return bad;
  return guarded([&] {
    const rsr::Strategy strat =
        make_strategy(model, strategy_surface, h_by_state);
    fill_report(rsr::verify_martingale(model->impl, strat, to_mc_options(mc)),
                out);
    return RSR_OK;
  });
}

rsr_status rsr_chi_log_chi(const rsr_model* model,
                           const rsr_surface* strategy_surface,
                           const double* h_by_state, const rsr_mc_options* mc,
                           double bound_total, rsr_mc_report* out) {
  const rsr_status bad =
      check_strategy_args(model, strategy_surface, h_by_state, mc, out);
  if (bad != RSR_OK) return bad;
  return guarded([&] {
    const rsr::Strategy strat =
        make_strategy(model, strategy_surface, h_by_state);
    fill_report(rsr::chi_log_chi_check(model->impl, strat, to_mc_options(mc),
                                       bound_total),
                out);
    return RSR_OK;
  });
}

rsr_status rsr_verify_generator(const rsr_model* model,
                                const double* h_by_state,
                                const rsr_mc_options* mc, char** json_out) {
  if (model == nullptr || h_by_state == nullptr || mc == nullptr ||
      json_out == nullptr)
    return fail(RSR_EINVAL, "rsr_verify_generator: null argument");
  return guarded([&] {
    const rsr::Mat h = map_row_major(h_by_state, model->impl.n_states,
                                     model->impl.m_assets);
    const std::vector<rsr::GeneratorCheckEntry> entries =
        rsr::verify_generator_change(model->impl, h, to_mc_options(mc));
    nlohmann::json arr = nlohmann::json::array();
    for (const rsr::GeneratorCheckEntry& e : entries) {
      nlohmann::json row;
      row["kind"] = e.kind;
      row["from"] = e.from + 1;
      if (e.to >= 0)
        row["to"] = e.to + 1;
      else
        row["to"] = nullptr;
      row["estimate"] = e.estimate;
      row["std_error"] = e.std_error;
      row["target"] = e.target;
      row["pass"] = e.pass;
      arr.push_back(std::move(row));
    }
    *json_out = dup_string(arr.dump(2));
    return RSR_OK;
  });
}

}  // extern "C"
