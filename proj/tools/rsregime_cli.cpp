// Command-line front end. Talks to the library exclusively through the C API
// so it doubles as a smoke test of the shared-library contract.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsregime.h"

namespace {

constexpr int kExitInput = 2;    // bad arguments, config, model, or files
constexpr int kExitNumeric = 3;  // solver or internal failure

[[noreturn]] void die(int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(code);
}

int exit_code_for(rsr_status status) {
  return (status == RSR_ENUMERIC || status == RSR_EINTERNAL) ? kExitNumeric
                                                             : kExitInput;
}

void check(rsr_status status, const std::string& what) {
  if (status != RSR_OK) die(exit_code_for(status), what + ": " + rsr_last_error());
}

struct ModelDeleter {
  void operator()(rsr_model* m) const { rsr_model_free(m); }
};
struct SurfaceDeleter {
  void operator()(rsr_surface* s) const { rsr_surface_free(s); }
};
using ModelPtr = std::unique_ptr<rsr_model, ModelDeleter>;
using SurfacePtr = std::unique_ptr<rsr_surface, SurfaceDeleter>;

std::string take_string(char* s) {
  std::string out = s != nullptr ? s : "";
  rsr_free_string(s);
  return out;
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Config {
  std::string model;
  std::string output;
  int n_steps = 200;
  double grad_tol = 1e-10;
  double ode_tol = 1e-9;
  double feasibility_margin = 1e-10;

  long long n_paths = 100000;
  bool has_seed = false;
  unsigned long long seed = 0;
  double k_sigma = 3.0;
  int initial_state = 1;  // one-based in config files
  int threads = -1;       // -1: unset

  std::string strategy_type;  // "surface" or "constant"
  std::string strategy_path;
  std::vector<std::vector<double>> strategy_h;
};

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(kExitInput, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    die(kExitInput, "config parse error in " + path + ": " + e.what());
  }
  Config c;
  try {
    c.model = j.value("model", "");
    c.output = j.value("output", "");
    if (j.contains("grid"))
      c.n_steps = j.at("grid").value("n_steps", c.n_steps);
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      c.grad_tol = t.value("grad", c.grad_tol);
      c.ode_tol = t.value("ode", c.ode_tol);
      c.feasibility_margin =
          t.value("feasibility_margin", c.feasibility_margin);
    }
    if (j.contains("mc")) {
      const auto& m = j.at("mc");
      c.n_paths = m.value("n_paths", c.n_paths);
      if (m.contains("seed")) {
        c.has_seed = true;
        c.seed = m.at("seed").get<unsigned long long>();
      }
      c.k_sigma = m.value("k_sigma", c.k_sigma);
      c.initial_state = m.value("initial_state", c.initial_state);
      if (m.contains("threads")) c.threads = m.at("threads").get<int>();
    }
    if (j.contains("strategy")) {
      const auto& s = j.at("strategy");
      c.strategy_type = s.value("type", "");
      c.strategy_path = s.value("path", "");
      if (s.contains("h"))
        c.strategy_h = s.at("h").get<std::vector<std::vector<double>>>();
    }
  } catch (const std::exception& e) {
    die(kExitInput, "config " + path + ": " + e.what());
  }
  return c;
}

// Command-line values shared by every subcommand; overrides beat the config.
struct Overrides {
  std::string config_path;
  bool force = false;
  std::string model;
  std::string output;
  int n_steps = 0;
  long long n_paths = 0;
  unsigned long long seed = 0;
  bool has_seed = false;
  int threads = -1;
  bool has_threads = false;
};

Config resolve(const Overrides& ov) {
  Config c = load_config(ov.config_path);
  if (!ov.model.empty()) c.model = ov.model;
  if (!ov.output.empty()) c.output = ov.output;
  if (ov.n_steps > 0) c.n_steps = ov.n_steps;
  if (ov.n_paths > 0) c.n_paths = ov.n_paths;
  if (ov.has_seed) {
    c.has_seed = true;
    c.seed = ov.seed;
  }
  if (ov.has_threads) c.threads = ov.threads;
  if (c.threads < 0) {
    if (const char* env = std::getenv("RS_REGIME_THREADS"))
      c.threads = std::atoi(env);
  }
  if (c.threads < 0) c.threads = 0;
  if (c.model.empty()) die(kExitInput, "config: \"model\" is required");
  if (c.output.empty()) die(kExitInput, "config: \"output\" prefix is required");
  return c;
}

// Prepares an output path: parent directories are created, and an existing
// file is only replaced under --force.
std::string out_path(const Config& c, bool force, const std::string& suffix) {
  const std::string path = c.output + suffix;
  const std::filesystem::path parent =
      std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  if (!force && std::filesystem::exists(path))
    die(kExitInput, "output file " + path + " exists; pass --force to replace");
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) die(kExitInput, "cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) die(kExitInput, "failed while writing " + path);
}

ModelPtr load_model_checked(const Config& c) {
  rsr_model* raw = nullptr;
  check(rsr_model_load(c.model.c_str(), &raw), "loading " + c.model);
  ModelPtr model(raw);
  int passed = 0;
  char* report = nullptr;
  check(rsr_model_validate(model.get(), &passed, &report), "validating model");
  const std::string report_text = take_string(report);
  if (passed == 0) {
    std::cerr << report_text << "\n";
    die(kExitInput, "model " + c.model + " failed validation");
  }
  return model;
}

rsr_solve_options solve_options(const Config& c) {
  rsr_solve_options opts;
  rsr_solve_options_init(&opts);
  opts.n_steps = c.n_steps;
  opts.grad_tol = c.grad_tol;
  opts.ode_tol = c.ode_tol;
  opts.feasibility_margin = c.feasibility_margin;
  return opts;
}

rsr_mc_options mc_options(const Config& c, const rsr_model* model) {
  if (!c.has_seed)
    die(kExitInput,
        "a Monte Carlo seed is required: set mc.seed in the config or pass "
        "--seed");
  if (c.n_paths < 2) die(kExitInput, "mc.n_paths must be at least 2");
  const int n = rsr_model_n_states(model);
  if (c.initial_state < 1 || c.initial_state > n)
    die(kExitInput, "mc.initial_state must be in 1.." + std::to_string(n));
  rsr_mc_options mc;
  rsr_mc_options_init(&mc);
  mc.n_paths = c.n_paths;
  mc.seed = c.seed;
  mc.initial_state = c.initial_state - 1;
  mc.threads = c.threads;
  mc.k_sigma = c.k_sigma;
  return mc;
}

// Strategy inputs for the MC commands: either a solved surface file or a
// constant allocation matrix. Exactly one is returned non-empty/non-null.
struct StrategyInput {
  SurfacePtr surface;
  std::vector<double> h_flat;  // n_states * m_assets row-major
};

StrategyInput load_strategy(const Config& c, const rsr_model* model) {
  StrategyInput out;
  if (c.strategy_type == "surface") {
    if (c.strategy_path.empty())
      die(kExitInput, "strategy: \"path\" is required for type \"surface\"");
    rsr_surface* raw = nullptr;
    check(rsr_surface_load_json(c.strategy_path.c_str(), &raw),
          "loading strategy surface " + c.strategy_path);
    out.surface.reset(raw);
  } else if (c.strategy_type == "constant") {
    const int n = rsr_model_n_states(model);
    const int m = rsr_model_m_assets(model);
    if (static_cast<int>(c.strategy_h.size()) != n)
      die(kExitInput, "strategy.h must have one row per state");
    for (const auto& row : c.strategy_h)
      if (static_cast<int>(row.size()) != m)
        die(kExitInput, "strategy.h rows must have one entry per asset");
    out.h_flat.reserve(static_cast<std::size_t>(n) * m);
    for (const auto& row : c.strategy_h)
      out.h_flat.insert(out.h_flat.end(), row.begin(), row.end());
  } else {
    die(kExitInput,
        "config: strategy.type must be \"surface\" or \"constant\"");
  }
  return out;
}

nlohmann::json strategy_descriptor(const Config& c) {
  nlohmann::json j;
  j["type"] = c.strategy_type;
  if (c.strategy_type == "constant") j["h"] = c.strategy_h;
  return j;
}

nlohmann::json report_json(const rsr_mc_report& rep) {
  nlohmann::json j;
  j["estimate"] = rep.estimate;
  j["std_error"] = rep.std_error;
  j["n_paths"] = rep.n_paths;
  j["seed"] = rep.seed;
  j["k_sigma"] = rep.k_sigma;
  if (rep.has_target != 0) {
    j["target"] = rep.target;
    j["pass"] = rep.pass != 0;
    j["one_sided"] = rep.one_sided != 0;
  }
  if (rep.has_j_theta != 0) j["j_theta"] = rep.j_theta;
  j["max_weight_share"] = rep.max_weight_share;
  return j;
}

void print_warnings(const rsr_surface* surface) {
  char* raw = nullptr;
  check(rsr_surface_warnings(surface, &raw), "reading surface warnings");
  const auto warnings = nlohmann::json::parse(take_string(raw));
  for (const auto& w : warnings)
    std::cerr << "warning: " << w.get<std::string>() << "\n";
}

SurfacePtr solve_surface(const Config& c, const rsr_model* model,
                         bool independent) {
  const rsr_solve_options opts = solve_options(c);
  rsr_surface* raw = nullptr;
  const rsr_status st =
      independent ? rsr_solve_independent_jumps(model, &opts, &raw)
                  : rsr_solve(model, &opts, &raw);
  check(st, "solving");
  return SurfacePtr(raw);
}

int run_solve(const Overrides& ov) {
  const Config c = resolve(ov);
  const std::string csv_path = out_path(c, ov.force, "_surface.csv");
  const std::string json_path = out_path(c, ov.force, "_surface.json");
  const ModelPtr model = load_model_checked(c);
  const SurfacePtr surface = solve_surface(c, model.get(), false);
  print_warnings(surface.get());
  check(rsr_surface_save_csv(surface.get(), csv_path.c_str()), "writing csv");
  check(rsr_surface_save_json(surface.get(), json_path.c_str()),
        "writing json");

  int n_states = 0, m_assets = 0;
  check(rsr_surface_dims(surface.get(), nullptr, &n_states, &m_assets), "dims");
  std::cout << "solved " << c.model << "\n";
  for (int i = 0; i < n_states; ++i) {
    double u = 0.0, v = 0.0;
    check(rsr_surface_u(surface.get(), 0, i, &u), "u");
    check(rsr_surface_v(surface.get(), 0, i, &v), "v");
    std::vector<double> h(static_cast<std::size_t>(m_assets));
    check(rsr_surface_h(surface.get(), 0, i, h.data()), "h");
    std::cout << "  state " << (i + 1) << ": u(0)=" << g17(u)
              << " v(0)=" << g17(v) << " h(0)=[";
    for (int a = 0; a < m_assets; ++a)
      std::cout << (a > 0 ? "," : "") << g17(h[a]);
    std::cout << "]\n";
  }
  std::cout << "wrote " << csv_path << " and " << json_path << "\n";
  return 0;
}

int run_kelly(const Overrides& ov) {
  const Config c = resolve(ov);
  const std::string csv_path = out_path(c, ov.force, "_kelly.csv");
  const ModelPtr model = load_model_checked(c);
  const SurfacePtr surface = solve_surface(c, model.get(), false);

  int n_times = 0, n_states = 0, m = 0;
  check(rsr_surface_dims(surface.get(), &n_times, &n_states, &m), "dims");
  const double theta = rsr_model_theta(model.get());

  std::ofstream out(csv_path, std::ios::binary);
  if (!out) die(kExitInput, "cannot open " + csv_path + " for writing");
  out << "t,state,u,v";
  for (int a = 0; a < m; ++a) out << ",h_" << (a + 1);
  for (int a = 0; a < m; ++a) out << ",hk_" << (a + 1);
  for (int a = 0; a < m; ++a) out << ",hh_" << (a + 1);
  out << ",residual\n";

  std::vector<double> h(static_cast<std::size_t>(m)),
      hk(static_cast<std::size_t>(m)), hh(static_cast<std::size_t>(m)),
      u_row(static_cast<std::size_t>(n_states));
  for (int k = 0; k < n_times; ++k) {
    double t = 0.0;
    check(rsr_surface_time(surface.get(), k, &t), "time");
    for (int i = 0; i < n_states; ++i)
      check(rsr_surface_u(surface.get(), k, i, &u_row[i]), "u");
    for (int i = 0; i < n_states; ++i) {
      double u = u_row[static_cast<std::size_t>(i)], v = 0.0, residual = 0.0;
      check(rsr_surface_v(surface.get(), k, i, &v), "v");
      check(rsr_surface_h(surface.get(), k, i, h.data()), "h");
      check(rsr_kelly_allocation(model.get(), t, i, hk.data(), nullptr,
                                 nullptr),
            "kelly allocation");
      check(rsr_mutual_fund_split(theta, m, h.data(), hk.data(), hh.data()),
            "mutual fund split");
      check(rsr_fixed_point_residual(model.get(), t, i, h.data(), u_row.data(),
                                     &residual),
            "fixed point residual");
      out << g17(t) << ',' << (i + 1) << ',' << g17(u) << ',' << g17(v);
      for (int a = 0; a < m; ++a) out << ',' << g17(h[a]);
      for (int a = 0; a < m; ++a) out << ',' << g17(hk[a]);
      for (int a = 0; a < m; ++a) out << ',' << g17(hh[a]);
      out << ',' << g17(residual) << '\n';
    }
  }
  out.flush();
  if (!out) die(kExitInput, "failed while writing " + csv_path);
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

int run_mc_command(const Overrides& ov, const std::string& which) {
  const Config c = resolve(ov);
  const std::string suffix =
      which == "simulate" ? "_mc.json" : "_martingale.json";
  const std::string json_path = out_path(c, ov.force, suffix);
  const ModelPtr model = load_model_checked(c);
  const rsr_mc_options mc = mc_options(c, model.get());
  const StrategyInput strat = load_strategy(c, model.get());
  const double* h_ptr = strat.h_flat.empty() ? nullptr : strat.h_flat.data();

  rsr_mc_report rep;
  if (which == "simulate") {
    // A surface strategy is checked against its own initial value.
    double target = 0.0;
    const double* target_ptr = nullptr;
    if (strat.surface) {
      check(rsr_surface_u(strat.surface.get(), 0, mc.initial_state, &target),
            "reading target from surface");
      target_ptr = &target;
    }
    check(rsr_estimate_criterion(model.get(), strat.surface.get(), h_ptr, &mc,
                                 target_ptr, &rep),
          "estimating criterion");
  } else {
    check(rsr_verify_martingale(model.get(), strat.surface.get(), h_ptr, &mc,
                                &rep),
          "verifying martingale");
  }

  nlohmann::json j = report_json(rep);
  j["command"] = which;
  j["initial_state"] = c.initial_state;
  j["strategy"] = strategy_descriptor(c);
  write_text(json_path, j.dump(2) + "\n");
  std::cout << which << ": estimate=" << g17(rep.estimate)
            << " std_error=" << g17(rep.std_error);
  if (rep.has_target != 0)
    std::cout << " target=" << g17(rep.target)
              << " pass=" << (rep.pass != 0 ? "yes" : "no");
  std::cout << "\nwrote " << json_path << "\n";
  return 0;
}

int run_verify_generator(const Overrides& ov) {
  const Config c = resolve(ov);
  const std::string json_path = out_path(c, ov.force, "_generator.json");
  const ModelPtr model = load_model_checked(c);
  const rsr_mc_options mc = mc_options(c, model.get());
  const StrategyInput strat = load_strategy(c, model.get());
  if (strat.h_flat.empty())
    die(kExitInput, "verify-generator requires a constant strategy");

  char* raw = nullptr;
  check(rsr_verify_generator(model.get(), strat.h_flat.data(), &mc, &raw),
        "verifying generator change");
  const auto entries = nlohmann::json::parse(take_string(raw));
  bool all_pass = true;
  for (const auto& e : entries) all_pass = all_pass && e.at("pass").get<bool>();

  nlohmann::json j;
  j["command"] = "verify-generator";
  j["initial_state"] = c.initial_state;
  j["strategy"] = strategy_descriptor(c);
  j["entries"] = entries;
  j["all_pass"] = all_pass;
  write_text(json_path, j.dump(2) + "\n");
  std::cout << "verify-generator: " << entries.size() << " checks, all_pass="
            << (all_pass ? "yes" : "no") << "\nwrote " << json_path << "\n";
  return 0;
}

int run_compare_independent(const Overrides& ov) {
  const Config c = resolve(ov);
  const std::string csv_path = out_path(c, ov.force, "_compare.csv");
  const std::string json_path = out_path(c, ov.force, "_compare.json");
  const ModelPtr model = load_model_checked(c);
  const SurfacePtr dep = solve_surface(c, model.get(), false);
  const SurfacePtr ind = solve_surface(c, model.get(), true);

  int n_states = 0, m = 0;
  check(rsr_surface_dims(dep.get(), nullptr, &n_states, &m), "dims");

  std::ofstream out(csv_path, std::ios::binary);
  if (!out) die(kExitInput, "cannot open " + csv_path + " for writing");
  out << "state,u_dep,u_ind,v_dep,v_ind";
  for (int a = 0; a < m; ++a) out << ",h_dep_" << (a + 1);
  for (int a = 0; a < m; ++a) out << ",h_ind_" << (a + 1);
  out << '\n';
  std::vector<double> u_dep(static_cast<std::size_t>(n_states));
  std::vector<double> hd(static_cast<std::size_t>(m)),
      hi(static_cast<std::size_t>(m));
  for (int i = 0; i < n_states; ++i) {
    double ud = 0.0, ui = 0.0, vd = 0.0, vi = 0.0;
    check(rsr_surface_u(dep.get(), 0, i, &ud), "u");
    check(rsr_surface_u(ind.get(), 0, i, &ui), "u");
    check(rsr_surface_v(dep.get(), 0, i, &vd), "v");
    check(rsr_surface_v(ind.get(), 0, i, &vi), "v");
    check(rsr_surface_h(dep.get(), 0, i, hd.data()), "h");
    check(rsr_surface_h(ind.get(), 0, i, hi.data()), "h");
    u_dep[static_cast<std::size_t>(i)] = ud;
    out << (i + 1) << ',' << g17(ud) << ',' << g17(ui) << ',' << g17(vd) << ','
        << g17(vi);
    for (int a = 0; a < m; ++a) out << ',' << g17(hd[a]);
    for (int a = 0; a < m; ++a) out << ',' << g17(hi[a]);
    out << '\n';
  }
  out.flush();
  if (!out) die(kExitInput, "failed while writing " + csv_path);

  // Pairwise prediction: with coupled jumps the investor in state i treats a
  // jump toward j more cautiously than the matched independent-jumps investor
  // exactly when u(j) > u(i).
  std::vector<double> q(static_cast<std::size_t>(n_states) * n_states);
  check(rsr_model_generator(model.get(), q.data()), "reading generator");
  nlohmann::json pairs = nlohmann::json::array();
  for (int i = 0; i < n_states; ++i) {
    for (int j2 = 0; j2 < n_states; ++j2) {
      if (i == j2 || q[static_cast<std::size_t>(i) * n_states + j2] <= 0.0)
        continue;
      nlohmann::json row;
      row["from"] = i + 1;
      row["to"] = j2 + 1;
      row["u_from"] = u_dep[static_cast<std::size_t>(i)];
      row["u_to"] = u_dep[static_cast<std::size_t>(j2)];
      row["has_jump_law"] = rsr_model_has_jump_law(model.get(), i, j2) != 0;
      row["dependent_more_jump_averse"] =
          u_dep[static_cast<std::size_t>(j2)] >
          u_dep[static_cast<std::size_t>(i)];
      pairs.push_back(std::move(row));
    }
  }
  nlohmann::json j;
  j["command"] = "compare-independent";
  j["pairs"] = pairs;
  write_text(json_path, j.dump(2) + "\n");
  std::cout << "wrote " << csv_path << " and " << json_path << "\n";
  return 0;
}

void add_common(CLI::App* cmd, Overrides& ov, bool& seen_seed,
                bool& seen_threads) {
  cmd->add_option("--config", ov.config_path, "JSON run configuration")
      ->required();
  cmd->add_flag("--force", ov.force, "replace existing output files");
  cmd->add_option("--model", ov.model, "override config model path");
  cmd->add_option("--output", ov.output, "override config output prefix");
  cmd->add_option("--n-steps", ov.n_steps, "override grid.n_steps");
  cmd->add_option("--n-paths", ov.n_paths, "override mc.n_paths");
  cmd->add_option("--seed", ov.seed, "override mc.seed")
      ->each([&seen_seed](const std::string&) { seen_seed = true; });
  cmd->add_option("--threads", ov.threads,
                  "worker threads (0 = hardware concurrency)")
      ->each([&seen_threads](const std::string&) { seen_threads = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive allocation under regime-switching markets"};
  app.require_subcommand(1);

  Overrides ov;
  bool seen_seed = false, seen_threads = false;
  CLI::App* solve = app.add_subcommand(
      "solve", "integrate the value surface and write CSV/JSON");
  CLI::App* kelly = app.add_subcommand(
      "kelly", "solve, then tabulate log-optimal and two-fund allocations");
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo estimate of the exponential criterion");
  CLI::App* martingale = app.add_subcommand(
      "verify-martingale", "Monte Carlo check that E[chi_T] = 1");
  CLI::App* generator = app.add_subcommand(
      "verify-generator",
      "Monte Carlo check of the chain statistics under the density");
  CLI::App* compare = app.add_subcommand(
      "compare-independent",
      "solve coupled and independent-jump variants side by side");
  for (CLI::App* cmd :
       {solve, kelly, simulate, martingale, generator, compare})
    add_common(cmd, ov, seen_seed, seen_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  ov.has_seed = seen_seed;
  ov.has_threads = seen_threads;

  if (solve->parsed()) return run_solve(ov);
  if (kelly->parsed()) return run_kelly(ov);
  if (simulate->parsed()) return run_mc_command(ov, "simulate");
  if (martingale->parsed()) return run_mc_command(ov, "verify-martingale");
  if (generator->parsed()) return run_verify_generator(ov);
  if (compare->parsed()) return run_compare_independent(ov);
  return kExitInput;
}
