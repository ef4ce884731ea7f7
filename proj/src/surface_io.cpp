#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsregime/hjb.hpp"

namespace rsr {

namespace {

// %.17g round-trips any double; outputs carry no timestamps or paths so
// identical surfaces always serialize to identical bytes.
std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json imat_to_json(const Eigen::MatrixXi& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j, Eigen::Index rows,
                  Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ValidationError(std::string("surface json: bad shape for ") + what);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(std::string("surface json: bad shape for ") + what);
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::MatrixXi imat_from_json(const nlohmann::json& j, Eigen::Index rows,
                               Eigen::Index cols, const char* what) {
  const Mat m = mat_from_json(j, rows, cols, what);
  return m.cast<int>();
}

}  // namespace

void save_surface_csv(const ValueSurface& surface, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "t,state,u,v";
  for (int a = 0; a < surface.m_assets; ++a) out << ",h_" << (a + 1);
  out << ",min_diag\n";
  for (int k = 0; k < surface.n_times(); ++k) {
    for (int i = 0; i < surface.n_states; ++i) {
      out << g17(surface.times[static_cast<std::size_t>(k)]) << ',' << (i + 1)
          << ',' << g17(surface.u(k, i)) << ',' << g17(surface.v(k, i));
      for (int a = 0; a < surface.m_assets; ++a)
        out << ',' << g17(surface.h[static_cast<std::size_t>(k)](i, a));
      out << ',' << surface.boundary(k, i) << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("failed while writing " + path);
}

void save_surface_json(const ValueSurface& surface, const std::string& path) {
  nlohmann::json j;
  j["kind"] = "value_surface";
  j["n_states"] = surface.n_states;
  j["m_assets"] = surface.m_assets;
  j["horizon"] = surface.horizon;
  j["theta"] = surface.theta;
  j["times"] = surface.times;
  j["u"] = mat_to_json(surface.u);
  j["v"] = mat_to_json(surface.v);
  nlohmann::json h = nlohmann::json::array();
  for (const Mat& node : surface.h) h.push_back(mat_to_json(node));
  j["h"] = std::move(h);
  j["grad_norm"] = mat_to_json(surface.grad_norm);
  j["boundary"] = imat_to_json(surface.boundary);
  j["iterations"] = imat_to_json(surface.iterations);
  j["ode_error_estimate"] = surface.ode_error_estimate;
  j["bounds"] = {{"g_min", surface.bounds.g_min},
                 {"r_min", surface.bounds.r_min},
                 {"u_min", surface.bounds.u_min},
                 {"u_max", surface.bounds.u_max}};
  j["warnings"] = surface.warnings;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("failed while writing " + path);
}

ValueSurface load_surface_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("surface json parse error in " + path + ": " +
                          e.what());
  }
  try {
    if (j.value("kind", std::string()) != "value_surface")
      throw ValidationError("surface json: missing kind \"value_surface\"");
    ValueSurface s;
    s.n_states = j.at("n_states").get<int>();
    s.m_assets = j.at("m_assets").get<int>();
    s.horizon = j.at("horizon").get<double>();
    s.theta = j.at("theta").get<double>();
    s.times = j.at("times").get<std::vector<double>>();
    if (s.n_states < 1 || s.m_assets < 1 || s.times.size() < 2)
      throw ValidationError("surface json: degenerate dimensions");
    for (std::size_t k = 1; k < s.times.size(); ++k)
      if (!(s.times[k] > s.times[k - 1]))
        throw ValidationError("surface json: times must be increasing");
    const auto nt = static_cast<Eigen::Index>(s.times.size());
    s.u = mat_from_json(j.at("u"), nt, s.n_states, "u");
    s.v = mat_from_json(j.at("v"), nt, s.n_states, "v");
    const auto& h = j.at("h");
    if (!h.is_array() || static_cast<Eigen::Index>(h.size()) != nt)
      throw ValidationError("surface json: bad shape for h");
    s.h.reserve(static_cast<std::size_t>(nt));
    for (const auto& node : h)
      s.h.push_back(mat_from_json(node, s.n_states, s.m_assets, "h node"));
    s.grad_norm = mat_from_json(j.at("grad_norm"), nt, s.n_states, "grad_norm");
    s.boundary = imat_from_json(j.at("boundary"), nt, s.n_states, "boundary");
    s.iterations =
        imat_from_json(j.at("iterations"), nt, s.n_states, "iterations");
    s.ode_error_estimate = j.value("ode_error_estimate", -1.0);
    if (j.contains("bounds")) {
      const auto& b = j.at("bounds");
      s.bounds.g_min = b.value("g_min", 0.0);
      s.bounds.r_min = b.value("r_min", 0.0);
      s.bounds.u_min = b.value("u_min", 1.0);
      s.bounds.u_max = b.value("u_max", 1.0);
    }
    if (j.contains("warnings"))
      s.warnings = j.at("warnings").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("surface json: malformed content in " + path + ": " +
                          e.what());
  }
}

}  // namespace rsr
