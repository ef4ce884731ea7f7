#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "rsregime.h"

namespace {

const std::string kRepo = RSREGIME_REPO_DIR;
const std::string kM2 = kRepo + "/models/m2.json";
const std::string kMerton = kRepo + "/models/merton.json";

struct ModelGuard {
  rsr_model* m = nullptr;
  ~ModelGuard() { rsr_model_free(m); }
};

struct SurfaceGuard {
  rsr_surface* s = nullptr;
  ~SurfaceGuard() { rsr_surface_free(s); }
};

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and error channel") {
  REQUIRE(rsr_version() != nullptr);
  CHECK(std::strlen(rsr_version()) > 0);

  rsr_model* m = nullptr;
  CHECK(rsr_model_load("/no/such/file.json", &m) == RSR_EIO);
  CHECK(m == nullptr);
  CHECK(std::strlen(rsr_last_error()) > 0);

  ModelGuard ok;
  REQUIRE(rsr_model_load(kM2.c_str(), &ok.m) == RSR_OK);
  CHECK(std::strlen(rsr_last_error()) == 0);  // success clears the message
}

TEST_CASE("status codes by failure class") {
  rsr_model* m = nullptr;
  CHECK(rsr_model_parse("{ not json", &m) == RSR_EVALIDATION);
  CHECK(rsr_model_parse("{}", &m) == RSR_EVALIDATION);
  CHECK(rsr_model_load(nullptr, &m) == RSR_EINVAL);
  CHECK(rsr_model_parse(nullptr, &m) == RSR_EINVAL);
  ModelGuard g;
  CHECK(rsr_model_load(kM2.c_str(), nullptr) == RSR_EINVAL);
  REQUIRE(rsr_model_load(kM2.c_str(), &g.m) == RSR_OK);
  CHECK(rsr_solve(g.m, nullptr, nullptr) == RSR_EINVAL);
  CHECK(rsr_surface_save_json(nullptr, "x") == RSR_EINVAL);
  rsr_model_free(nullptr);    // null frees are no-ops
  rsr_surface_free(nullptr);
  rsr_free_string(nullptr);
}

TEST_CASE("model accessors") {
  ModelGuard g;
  REQUIRE(rsr_model_load(kM2.c_str(), &g.m) == RSR_OK);
  CHECK(rsr_model_n_states(g.m) == 2);
  CHECK(rsr_model_m_assets(g.m) == 1);
  CHECK(rsr_model_horizon(g.m) == 1.0);
  CHECK(rsr_model_theta(g.m) == 1.0);
  double q[4] = {0, 0, 0, 0};
  REQUIRE(rsr_model_generator(g.m, q) == RSR_OK);
  CHECK(q[0] == -0.5);
  CHECK(q[1] == 0.5);
  CHECK(q[2] == 1.0);
  CHECK(q[3] == -1.0);
  CHECK(rsr_model_has_jump_law(g.m, 0, 1) == 1);
  CHECK(rsr_model_has_jump_law(g.m, 1, 0) == 1);
  CHECK(rsr_model_has_jump_law(g.m, 0, 0) == 0);
  CHECK(rsr_model_has_jump_law(g.m, 5, 0) == 0);  // out of range reads as no

  int passed = -1;
  char* report = nullptr;
  REQUIRE(rsr_model_validate(g.m, &passed, &report) == RSR_OK);
  CHECK(passed == 1);
  REQUIRE(report != nullptr);
  CHECK(nlohmann::json::parse(report).is_object());
  rsr_free_string(report);
}

TEST_CASE("solve, inspect, persist") {
  ModelGuard g;
  REQUIRE(rsr_model_load(kM2.c_str(), &g.m) == RSR_OK);
  rsr_solve_options opts;
  rsr_solve_options_init(&opts);
  CHECK(opts.n_steps == 200);
  opts.n_steps = 24;

  SurfaceGuard s;
  REQUIRE(rsr_solve(g.m, &opts, &s.s) == RSR_OK);
  int n_times = 0, n_states = 0, m_assets = 0;
  REQUIRE(rsr_surface_dims(s.s, &n_times, &n_states, &m_assets) == RSR_OK);
  CHECK(n_states == 2);
  CHECK(m_assets == 1);
  CHECK(n_times >= 25);

  double horizon = 0, theta = 0, ode_err = 0;
  REQUIRE(rsr_surface_info(s.s, &horizon, &theta, &ode_err) == RSR_OK);
  CHECK(horizon == 1.0);
  CHECK(theta == 1.0);

  double t0 = -1, tN = -1;
  REQUIRE(rsr_surface_time(s.s, 0, &t0) == RSR_OK);
  REQUIRE(rsr_surface_time(s.s, n_times - 1, &tN) == RSR_OK);
  CHECK(t0 == 0.0);
  CHECK(tN == 1.0);
  CHECK(rsr_surface_time(s.s, n_times, &t0) == RSR_EINVAL);

  double u = 0, v = 0, h = 0;
  REQUIRE(rsr_surface_u(s.s, 0, 0, &u) == RSR_OK);
  REQUIRE(rsr_surface_v(s.s, 0, 0, &v) == RSR_OK);
  REQUIRE(rsr_surface_h(s.s, 0, 0, &h) == RSR_OK);
  CHECK(u > 0.9);
  CHECK(u < 1.0);
  CHECK(v == doctest::Approx(-std::log(u)).epsilon(1e-12));
  CHECK(h > 0.0);

  double u_end = 0;
  REQUIRE(rsr_surface_u(s.s, n_times - 1, 0, &u_end) == RSR_OK);
  CHECK(u_end == 1.0);

  char* warn = nullptr;
  REQUIRE(rsr_surface_warnings(s.s, &warn) == RSR_OK);
  REQUIRE(warn != nullptr);
  CHECK(nlohmann::json::parse(warn).is_array());
  CHECK(nlohmann::json::parse(warn).empty());
  rsr_free_string(warn);

  const auto dir = std::filesystem::temp_directory_path() / "rsr_capi_io";
  std::filesystem::create_directories(dir);
  const std::string jpath = (dir / "s.json").string();
  REQUIRE(rsr_surface_save_json(s.s, jpath.c_str()) == RSR_OK);
  SurfaceGuard loaded;
  REQUIRE(rsr_surface_load_json(jpath.c_str(), &loaded.s) == RSR_OK);
  double u2 = 0;
  REQUIRE(rsr_surface_u(loaded.s, 0, 0, &u2) == RSR_OK);
  CHECK(u2 == u);  // round trip is bitwise
  std::filesystem::remove_all(dir);
}

TEST_CASE("closed form and allocation helpers") {
  ModelGuard g;
  REQUIRE(rsr_model_load(kMerton.c_str(), &g.m) == RSR_OK);
  double u = 0, v = 0;
  REQUIRE(rsr_closed_form_no_jump(g.m, 0.0, &u, &v) == RSR_OK);
  CHECK(u == doctest::Approx(std::exp(-0.0425)).epsilon(1e-13));
  CHECK(v == doctest::Approx(0.0425).epsilon(1e-12));
  REQUIRE(rsr_closed_form_no_jump(g.m, 0.0, &u, nullptr) == RSR_OK);

  double h = 0, objective = 0, residual = 0;
  REQUIRE(rsr_kelly_allocation(g.m, 0.0, 0, &h, &objective, &residual) ==
          RSR_OK);
  CHECK(h == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(objective == doctest::Approx(0.065).epsilon(1e-10));
  CHECK(residual <= 1e-9);

  const double u_vec[1] = {1.0};
  double res = -1;
  const double h_at[1] = {1.5 / 2.0};
  REQUIRE(rsr_fixed_point_residual(g.m, 0.0, 0, h_at, u_vec, &res) == RSR_OK);
  CHECK(res <= 1e-9);  // single-state optimum is excess / ((1+theta) S)

  const double h_star[2] = {0.4, 0.6};
  const double h_kelly[2] = {1.0, -0.2};
  double h_tilde[2] = {0, 0};
  REQUIRE(rsr_mutual_fund_split(0.5, 2, h_star, h_kelly, h_tilde) == RSR_OK);
  for (int d = 0; d < 2; ++d) {
    const double back = (0.5 * h_tilde[d] + h_kelly[d]) / 1.5;
    CHECK(back == doctest::Approx(h_star[d]).epsilon(1e-13));
  }

  ModelGuard m2g;
  REQUIRE(rsr_model_load(kM2.c_str(), &m2g.m) == RSR_OK);
  CHECK(rsr_closed_form_no_jump(m2g.m, 0.0, &u, &v) == RSR_EVALIDATION);
}

TEST_CASE("effective generator and integrability bound") {
  ModelGuard g;
  REQUIRE(rsr_model_load(kM2.c_str(), &g.m) == RSR_OK);
  const double h[2] = {0.5, 0.5};
  double q[4] = {0, 0, 0, 0};
  REQUIRE(rsr_effective_generator(g.m, h, 1.0, q) == RSR_OK);
  CHECK(q[1] == doctest::Approx(0.5 / 0.9).epsilon(1e-14));
  CHECK(q[2] == doctest::Approx(1.0 / 1.05).epsilon(1e-14));
  double bound = 0;
  REQUIRE(rsr_density_moment_bound(g.m, h, &bound) == RSR_OK);
  CHECK(bound == doctest::Approx(0.0328925736961451).epsilon(1e-10));
}

TEST_CASE("monte carlo through the c interface") {
  ModelGuard g;
  REQUIRE(rsr_model_load(kM2.c_str(), &g.m) == RSR_OK);
  rsr_mc_options mc;
  rsr_mc_options_init(&mc);
  mc.n_paths = 8000;
  mc.seed = 3;
  mc.initial_state = 0;

  const double h[2] = {0.5, 0.5};
  rsr_mc_report rep;

  // exactly one strategy source must be given
  CHECK(rsr_estimate_criterion(g.m, nullptr, nullptr, &mc, nullptr, &rep) ==
        RSR_EINVAL);

  REQUIRE(rsr_verify_martingale(g.m, nullptr, h, &mc, &rep) == RSR_OK);
  CHECK(rep.has_target == 1);
  CHECK(rep.target == 1.0);
  CHECK(rep.pass == 1);
  CHECK(rep.n_paths == 8000);
  CHECK(rep.seed == 3);

  rsr_solve_options sopt;
  rsr_solve_options_init(&sopt);
  sopt.n_steps = 32;
  SurfaceGuard s;
  REQUIRE(rsr_solve(g.m, &sopt, &s.s) == RSR_OK);
  double u0 = 0;
  REQUIRE(rsr_surface_u(s.s, 0, 0, &u0) == RSR_OK);
  REQUIRE(rsr_estimate_criterion(g.m, s.s, nullptr, &mc, &u0, &rep) == RSR_OK);
  CHECK(rep.has_target == 1);
  CHECK(rep.pass == 1);
  CHECK(std::abs(rep.estimate - u0) <= 3.0 * rep.std_error);
  CHECK(rep.has_j_theta == 1);

  // both sources at once is rejected
  CHECK(rsr_estimate_criterion(g.m, s.s, h, &mc, nullptr, &rep) == RSR_EINVAL);

  double bound = 0;
  REQUIRE(rsr_density_moment_bound(g.m, h, &bound) == RSR_OK);
  REQUIRE(rsr_chi_log_chi(g.m, nullptr, h, &mc, bound * 1.0, &rep) == RSR_OK);
  CHECK(rep.one_sided == 1);
  CHECK(rep.pass == 1);

  char* json = nullptr;
  REQUIRE(rsr_verify_generator(g.m, h, &mc, &json) == RSR_OK);
  REQUIRE(json != nullptr);
  const auto arr = nlohmann::json::parse(json);
  rsr_free_string(json);
  REQUIRE(arr.is_array());
  CHECK(arr.size() == 6);
  for (const auto& e : arr) {
    CHECK(e.at("pass").get<bool>());
    const int from = e.at("from").get<int>();
    CHECK(from >= 1);  // one-based in the serialized form
    CHECK(from <= 2);
    if (e.at("kind") == "intensity") CHECK(e.at("to").is_null());
  }

  // infeasible constant allocation surfaces as a validation failure
  const double bad[2] = {5.5, 0.5};
  CHECK(rsr_verify_martingale(g.m, nullptr, bad, &mc, &rep) ==
        RSR_EVALIDATION);
  CHECK(std::strlen(rsr_last_error()) > 0);
}

TEST_CASE("solve failure propagates numeric status") {
  // theta = 0 fails validation inside solve
  ModelGuard g;
  const char* text = R"({
    "n_states": 1, "m_assets": 1, "horizon": 1.0, "theta": 1.0,
    "Q": [[0.0]],
    "coeffs": [[{"t_start": 0, "t_end": 1, "mu": [0.08], "sigma": [[0.2]], "r": 0.02}]]
  })";
  REQUIRE(rsr_model_parse(text, &g.m) == RSR_OK);
  rsr_solve_options opts;
  rsr_solve_options_init(&opts);
  opts.n_steps = 0;  // invalid grid
  rsr_surface* s = nullptr;
  CHECK(rsr_solve(g.m, &opts, &s) != RSR_OK);
  CHECK(s == nullptr);
}

}  // TEST_SUITE
