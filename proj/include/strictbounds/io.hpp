#pragma once

// JSON / CSV reading and writing. Needs nlohmann/json (json.hpp) on the include path.

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "experiments.hpp"
#include "intervals.hpp"
#include "maxquantile.hpp"
#include "model.hpp"
#include "nulldist.hpp"

namespace strictbounds {

using Json = nlohmann::json;

/// Finite numbers as numbers, infinities as "inf" / "-inf", NaN as null.
inline Json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const Json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw InputError("key '" + key + "' must be a number, \"inf\" or \"-inf\"");
}

inline Json vector_to_json(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number_to_json(v[i]));
  return a;
}

inline VectorXd vector_from_json(const Json& j, const std::string& key) {
  if (!j.is_array()) throw InputError("key '" + key + "' must be an array of numbers");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number() && !j[i].is_string()) throw InputError("key '" + key + "' must contain only numbers");
    v[static_cast<Index>(i)] = number_from_json(j[i], key);
  }
  return v;
}

inline MatrixXd matrix_from_json(const Json& j, const std::string& key, Index cols_if_empty = 0) {
  if (!j.is_array()) throw InputError("key '" + key + "' must be an array of rows");
  if (j.empty()) return MatrixXd(0, cols_if_empty);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw InputError("key '" + key + "' must be a nonempty array of nonempty rows");
  MatrixXd M(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InputError("key '" + key + "' rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw InputError("key '" + key + "' must contain only numbers");
      M(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
    }
  }
  return M;
}

inline Json matrix_to_json(const MatrixXd& M) {
  Json a = Json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    a.push_back(row);
  }
  return a;
}

// ---- model ----------------------------------------------------------------

inline const Json& require(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  return j.at(key);
}

/// {"K": [[..]], "h": [..], "constraints": {"type": "nonneg" | "box" | "linear", ...}}
inline ProblemInstance model_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("model: top level must be an object");
  MatrixXd K = matrix_from_json(require(j, "K", "model"), "K");
  VectorXd h = vector_from_json(require(j, "h", "model"), "h");
  const Json& c = require(j, "constraints", "model");
  const Json& type = require(c, "type", "constraints");
  if (!type.is_string()) throw InputError("key 'type' must be a string");
  const std::string t = type.get<std::string>();
  std::optional<ConstraintSet> cs;
  try {
    if (t == "nonneg") {
      cs = ConstraintSet::nonnegative(K.cols());
    } else if (t == "box") {
      cs = ConstraintSet::box(vector_from_json(require(c, "lower", "constraints"), "lower"),
                              vector_from_json(require(c, "upper", "constraints"), "upper"));
    } else if (t == "linear") {
      MatrixXd A = matrix_from_json(require(c, "A", "constraints"), "A", K.cols());
      VectorXd b = vector_from_json(require(c, "b", "constraints"), "b");
      cs = ConstraintSet::linear(std::move(A), std::move(b));
    } else {
      throw InputError("key 'type' must be one of nonneg, box, linear (got '" + t + "')");
    }
    return ProblemInstance(std::move(K), std::move(h), std::move(*cs));
  } catch (const InputError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

inline Json model_to_json(const ProblemInstance& inst) {
  Json j;
  j["K"] = matrix_to_json(inst.K());
  j["h"] = vector_to_json(inst.h());
  Json c;
  switch (inst.constraints().kind()) {
    case ConstraintSet::Kind::NonNegativeOrthant: c["type"] = "nonneg"; break;
    case ConstraintSet::Kind::Box:
      c["type"] = "box";
      c["lower"] = vector_to_json(inst.constraints().as_box().lower);
      c["upper"] = vector_to_json(inst.constraints().as_box().upper);
      break;
    case ConstraintSet::Kind::LinearInequalities:
      c["type"] = "linear";
      c["A"] = matrix_to_json(inst.constraints().as_linear().A);
      c["b"] = vector_to_json(inst.constraints().as_linear().b);
      break;
  }
  j["constraints"] = c;
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": invalid JSON (" + e.what() + ")");
  }
}

inline ProblemInstance load_model(const std::string& path) { return model_from_json(parse_json(read_file(path), path)); }

/// Numbers separated by commas, whitespace or newlines.
inline VectorXd parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw InputError(what + ": cannot parse '" + tok + "' as a number");
    v.push_back(x);
    tok.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == ';' || std::isspace(static_cast<unsigned char>(ch))) flush();
    else tok.push_back(ch);
  }
  flush();
  if (v.empty()) throw InputError(what + ": no values");
  return Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size()));
}

/// Observation file: a JSON array, or CSV with one value per line.
inline VectorXd load_observation(const std::string& path) {
  std::string text = read_file(path);
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') return vector_from_json(parse_json(text, path), "y");
  return parse_number_list(text, path);
}

// ---- results ----------------------------------------------------------------

inline Json to_json(const IntervalResult& r) {
  Json j;
  j["method"] = to_string(r.method);
  j["alpha"] = r.alpha;
  j["lower"] = r.empty ? Json(nullptr) : number_to_json(r.lower);
  j["upper"] = r.empty ? Json(nullptr) : number_to_json(r.upper);
  j["empty"] = r.empty;
  j["q_used"] = number_to_json(r.q_used);
  j["s2"] = r.s2;
  j["n_solves"] = r.n_solves;
  return j;
}

inline Json to_json(const DecisionRule& r) {
  Json j;
  j["level"] = r.level();
  j["provenance"] = r.provenance();
  j["seed"] = r.seed();
  switch (r.kind()) {
    case DecisionRule::Kind::Scalar:
      j["kind"] = "scalar";
      j["q"] = r.scalar_value();
      break;
    case DecisionRule::Kind::Chi2One:
      j["kind"] = "chi2_one";
      j["q"] = r.scalar_value();
      break;
    case DecisionRule::Kind::Chi2M:
      j["kind"] = "chi2_m";
      j["q"] = r.scalar_value();
      j["dof"] = r.dof();
      break;
    case DecisionRule::Kind::PerMu:
      j["kind"] = "per_mu";
      if (r.is_function()) throw std::invalid_argument("function-valued rules cannot be serialized");
      j["mu_grid"] = r.mu_grid();
      j["q_values"] = r.q_values();
      break;
  }
  return j;
}

inline DecisionRule decision_rule_from_json(const Json& j) {
  const std::string kind = require(j, "kind", "rule").get<std::string>();
  const double level = number_from_json(require(j, "level", "rule"), "level");
  const std::string prov = j.value("provenance", std::string("file"));
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  try {
    if (kind == "scalar") return DecisionRule::scalar(number_from_json(require(j, "q", "rule"), "q"), level, prov, seed);
    if (kind == "chi2_one") return DecisionRule::chi2_one(level);
    if (kind == "chi2_m") return DecisionRule::chi2_m(level, require(j, "dof", "rule").get<int>());
    if (kind == "per_mu") {
      VectorXd g = vector_from_json(require(j, "mu_grid", "rule"), "mu_grid");
      VectorXd q = vector_from_json(require(j, "q_values", "rule"), "q_values");
      return DecisionRule::per_mu(std::vector<double>(g.data(), g.data() + g.size()),
                                  std::vector<double>(q.data(), q.data() + q.size()), level, prov, seed);
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("rule: ") + e.what());
  }
  throw InputError("key 'kind' must be one of scalar, chi2_one, chi2_m, per_mu");
}

inline Json to_json(const CoverageRow& r) {
  Json j;
  j["truth"] = vector_to_json(r.truth);
  j["method"] = to_string(r.method);
  j["alpha"] = r.alpha;
  j["covered"] = r.covered;
  j["reps"] = r.reps;
  j["coverage"] = r.coverage;
  j["cov_lo"] = r.cov_lo;
  j["cov_hi"] = r.cov_hi;
  j["mean_len"] = number_to_json(r.mean_len);
  j["len_se"] = number_to_json(r.len_se);
  j["empty_count"] = r.empty_count;
  j["unbounded_count"] = r.unbounded_count;
  j["failure_count"] = r.failure_count;
  j["seed"] = r.seed;
  return j;
}

inline Json to_json(const CoverageReport& rep) {
  Json j;
  j["scenario"] = rep.scenario;
  j["seed"] = rep.seed;
  j["rows"] = Json::array();
  for (const auto& r : rep.rows) j["rows"].push_back(to_json(r));
  j["rules"] = Json::array();
  for (const auto& [alpha, rs] : rep.rules) {
    Json e;
    e["alpha"] = alpha;
    if (rs.mq) e["MQ"] = to_json(*rs.mq);
    if (rs.mqmu) e["MQmu"] = rs.mqmu->is_function() ? Json(rs.mqmu->provenance()) : to_json(*rs.mqmu);
    j["rules"].push_back(e);
  }
  return j;
}

inline Json to_json(const DominanceReport& d) {
  Json j;
  j["verdict"] = to_string(d.verdict);
  j["violations"] = d.violations;
  j["min_z"] = number_to_json(d.min_z);
  j["grid_size"] = d.rows.size();
  return j;
}

inline Json to_json(const MeanCheck& m) {
  return Json{{"mean", m.mean}, {"se", m.se}, {"target", m.target}, {"within_4se", m.within()}};
}

inline Json to_json(const CounterexampleMeanReport& r) {
  Json j;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["slice"] = to_json(r.slice);
  j["orthant"] = to_json(r.orthant);
  j["llr"] = to_json(r.llr);
  j["refuted"] = r.refuted();
  return j;
}

inline Json to_json(const CouplingReport& r) {
  return Json{{"n", r.n}, {"seed", r.seed}, {"violations", r.violations}, {"max_excess", r.max_excess}, {"tol", r.tol}};
}

inline Json to_json(const DivergenceReport& r) {
  Json j;
  j["seed"] = r.seed;
  j["rows"] = Json::array();
  for (const auto& row : r.rows) j["rows"].push_back(Json{{"p", row.p}, {"mean", row.mean}, {"se", row.se}});
  j["strictly_increasing"] = r.strictly_increasing();
  j["diverges"] = r.diverges();
  return j;
}

inline Json to_json(const QuantileCurveReport& r) {
  Json j;
  j["level"] = r.level;
  j["chi2_cutoff"] = r.chi2_cutoff;
  j["seed"] = r.seed;
  j["rows"] = Json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back(
        Json{{"t", row.t}, {"q", row.q}, {"ci_lo", row.ci_lo}, {"ci_hi", row.ci_hi}, {"exceeds", row.exceeds}});
  return j;
}

inline Json to_json(const MaxQuantileResult& r) {
  Json j;
  j["q"] = r.q;
  j["ci_lo"] = r.ci_lo;
  j["ci_hi"] = r.ci_hi;
  j["argmax"] = vector_to_json(r.argmax);
  j["level"] = r.level;
  j["seed"] = r.seed;
  j["evaluations"] = r.evaluations.size();
  return j;
}

}  // namespace strictbounds
