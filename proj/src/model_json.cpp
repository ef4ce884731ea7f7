#include "rsregime/model_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rsr {

namespace {

using nlohmann::json;

// Scalars are accepted wherever a length-m vector is expected (handy for
// single-asset models).
Vec read_vec(const json& node, int m, const std::string& what) {
  Vec out(m);
  if (node.is_number()) {
    if (m != 1)
      throw ValidationError(what + ": scalar given but m_assets = " +
                            std::to_string(m));
    out[0] = node.get<double>();
    return out;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != m)
    throw ValidationError(what + ": expected array of length " +
                          std::to_string(m));
  for (int d = 0; d < m; ++d) out[d] = node[d].get<double>();
  return out;
}

Mat read_mat(const json& node, int rows, int cols, const std::string& what) {
  Mat out(rows, cols);
  if (node.is_number()) {
    if (rows != 1 || cols != 1)
      throw ValidationError(what + ": scalar given for a matrix field");
    out(0, 0) = node.get<double>();
    return out;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != rows)
    throw ValidationError(what + ": expected " + std::to_string(rows) +
                          " rows");
  for (int i = 0; i < rows; ++i) {
    const json& row = node[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ValidationError(what + ": row " + std::to_string(i + 1) +
                            " must have " + std::to_string(cols) + " entries");
    for (int j = 0; j < cols; ++j) out(i, j) = row[j].get<double>();
  }
  return out;
}

const json& require(const json& node, const char* key,
                    const std::string& what) {
  auto it = node.find(key);
  if (it == node.end())
    throw ValidationError(what + ": missing key \"" + key + "\"");
  return *it;
}

DensitySpec read_density(const json& node, int m, const std::string& what) {
  DensitySpec spec;
  const std::string type = require(node, "type", what).get<std::string>();
  if (type == "uniform")
    spec.family = DensitySpec::Family::Uniform;
  else if (type == "trunc_normal")
    spec.family = DensitySpec::Family::TruncNormal;
  else if (type == "trunc_dexp")
    spec.family = DensitySpec::Family::TruncDoubleExp;
  else
    throw ValidationError(what + ": unknown density type \"" + type + "\"");

  spec.a = read_vec(require(node, "a", what), m, what + ".a");
  spec.b = read_vec(require(node, "b", what), m, what + ".b");
  if (spec.family != DensitySpec::Family::Uniform) {
    spec.location =
        read_vec(require(node, "location", what), m, what + ".location");
    spec.scale = read_vec(require(node, "scale", what), m, what + ".scale");
  }
  spec.nodes = node.value("nodes", 16);
  return spec;
}

MarketModel from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("model document must be an object");

  MarketModel model;
  model.n_states = require(doc, "n_states", "model").get<int>();
  model.m_assets = require(doc, "m_assets", "model").get<int>();
  model.horizon = require(doc, "horizon", "model").get<double>();
  model.theta = require(doc, "theta", "model").get<double>();
  model.vol_epsilon = doc.value("epsilon", 1e-8);
  if (model.n_states < 1 || model.m_assets < 1)
    throw ValidationError("model: n_states and m_assets must be >= 1");

  const int n = model.n_states, m = model.m_assets;
  model.generator = read_mat(require(doc, "Q", "model"), n, n, "Q");

  const json& coeffs = require(doc, "coeffs", "model");
  if (!coeffs.is_array() || static_cast<int>(coeffs.size()) != n)
    throw ValidationError("coeffs: expected one schedule per state");
  model.coeffs.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::string where = "coeffs[" + std::to_string(i + 1) + "]";
    if (!coeffs[i].is_array() || coeffs[i].empty())
      throw ValidationError(where + ": expected a non-empty piece list");
    for (const json& pj : coeffs[i]) {
      CoeffPiece piece;
      piece.t_start = require(pj, "t_start", where).get<double>();
      piece.t_end = require(pj, "t_end", where).get<double>();
      piece.mu = read_vec(require(pj, "mu", where), m, where + ".mu");
      piece.sigma = read_mat(require(pj, "sigma", where), m, m, where + ".sigma");
      piece.r = require(pj, "r", where).get<double>();
      model.coeffs[i].push_back(std::move(piece));
    }
  }

  if (auto it = doc.find("jump_laws"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("jump_laws must be an array");
    for (const json& lj : *it) {
      const int from = require(lj, "from", "jump_laws").get<int>();
      const int to = require(lj, "to", "jump_laws").get<int>();
      const std::string where = "jump_laws[" + std::to_string(from) + "->" +
                                std::to_string(to) + "]";
      if (from < 1 || from > n || to < 1 || to > n || from == to)
        throw ValidationError(where + ": state indices must be distinct and "
                              "within 1..n_states");
      JumpLaw law = [&]() {
        if (auto atoms = lj.find("atoms"); atoms != lj.end()) {
          if (!atoms->is_array() || atoms->empty())
            throw ValidationError(where + ": atoms must be a non-empty array");
          std::vector<JumpAtom> list;
          for (const json& aj : *atoms) {
            JumpAtom atom;
            atom.z = read_vec(require(aj, "z", where), m, where + ".z");
            atom.p = require(aj, "p", where).get<double>();
            list.push_back(std::move(atom));
          }
          return JumpLaw(std::move(list));
        }
        if (auto dens = lj.find("density"); dens != lj.end())
          return discretize_density(read_density(*dens, m, where));
        throw ValidationError(where + ": needs \"atoms\" or \"density\"");
      }();
      if (model.jump_law(from - 1, to - 1))
        throw ValidationError(where + ": duplicate law for this transition");
      model.set_jump_law(from - 1, to - 1, std::move(law));
    }
  }

  return model;
}

}  // namespace

MarketModel model_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ValidationError(std::string("model JSON parse error: ") + err.what());
  }
  return from_json(doc);
}

MarketModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json_text(buf.str());
}

}  // namespace rsr
