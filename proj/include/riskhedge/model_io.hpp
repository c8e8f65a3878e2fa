#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "risk.hpp"
#include "tree.hpp"

namespace riskhedge {

template <class S>
struct Model {
  ScenarioTree<S> tree;
  RiskMeasureSpec<S> spec;
  std::optional<NodeFunction<S>> payoff;
};

namespace detail {

using nlohmann::json;

/// Numbers parse directly; strings may carry exact values as "p/q" or a
/// decimal literal, which matters for the rational build.
template <class S>
inline S parse_scalar(const json& j, const std::string& where) {
  if (j.is_number()) return scalar_traits<S>::from_double(j.template get<double>());
  if (j.is_string()) {
    const std::string text = j.template get<std::string>();
    try {
      return scalar_traits<S>::from_string(text);
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "bad numeric literal '" + text + "' in " + where);
    }
  }
  fail(ErrorCode::parse_error, "expected a number in " + where);
}

inline RiskVariant variant_from_string(const std::string& s) {
  if (s == "WORST_CASE" || s == "worst_case") return RiskVariant::worst_case;
  if (s == "CVAR" || s == "cvar") return RiskVariant::cvar;
  if (s == "KERNELS" || s == "kernels") return RiskVariant::kernels;
  if (s == "ACCEPTANCE_CONE" || s == "cone") return RiskVariant::cone;
  fail(ErrorCode::parse_error, "unknown risk-measure variant '" + s + "'");
}

template <class S>
inline std::map<NodeId, std::vector<std::vector<S>>> parse_per_node(const json& j,
                                                                    const std::string& where) {
  std::map<NodeId, std::vector<std::vector<S>>> out;
  if (!j.is_object()) fail(ErrorCode::parse_error, where + " must map node ids to vector lists");
  for (const auto& [key, val] : j.items()) {
    NodeId id = 0;
    try {
      id = static_cast<NodeId>(std::stoll(key));
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "bad node id '" + key + "' in " + where);
    }
    if (!val.is_array()) fail(ErrorCode::parse_error, where + "[" + key + "] must be an array");
    std::vector<std::vector<S>> vecs;
    for (const auto& row : val) {
      if (!row.is_array()) fail(ErrorCode::parse_error, where + "[" + key + "] rows must be arrays");
      std::vector<S> v;
      for (const auto& x : row) v.push_back(parse_scalar<S>(x, where + "[" + key + "]"));
      vecs.push_back(std::move(v));
    }
    out[id] = std::move(vecs);
  }
  return out;
}

template <class S>
inline RiskFragment<S> parse_fragment(const json& j) {
  if (!j.is_object() || !j.contains("variant"))
    fail(ErrorCode::parse_error, "risk_measure needs a 'variant' field");
  RiskFragment<S> frag;
  frag.variant = variant_from_string(j.at("variant").template get<std::string>());
  if (frag.variant == RiskVariant::cvar) {
    if (!j.contains("alpha")) fail(ErrorCode::parse_error, "cvar risk measure needs 'alpha'");
    frag.alpha = parse_scalar<S>(j.at("alpha"), "risk_measure.alpha");
  }
  if (frag.variant == RiskVariant::kernels) {
    if (!j.contains("kernels")) fail(ErrorCode::parse_error, "kernels risk measure needs 'kernels'");
    frag.per_node = parse_per_node<S>(j.at("kernels"), "risk_measure.kernels");
  }
  if (frag.variant == RiskVariant::cone) {
    if (!j.contains("generators"))
      fail(ErrorCode::parse_error, "cone risk measure needs 'generators'");
    frag.per_node = parse_per_node<S>(j.at("generators"), "risk_measure.generators");
  }
  return frag;
}

}  // namespace detail

template <class S>
inline Model<S> load_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, std::string("model is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::parse_error, "model must be a JSON object");
  for (const char* key : {"assets", "nodes", "risk_measure"})
    if (!j.contains(key))
      fail(ErrorCode::parse_error, std::string("model is missing '") + key + "'");

  std::vector<std::string> assets;
  for (const auto& a : j.at("assets")) assets.push_back(a.template get<std::string>());

  std::vector<TreeNode<S>> nodes;
  if (!j.at("nodes").is_array()) fail(ErrorCode::parse_error, "'nodes' must be an array");
  for (const auto& nj : j.at("nodes")) {
    TreeNode<S> n;
    try {
      n.id = nj.at("id").template get<NodeId>();
      n.time = nj.at("time").template get<int>();
      if (!nj.at("parent").is_null()) n.parent = nj.at("parent").template get<NodeId>();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorCode::parse_error, std::string("bad node entry: ") + e.what());
    }
    const std::string where = "node " + std::to_string(n.id);
    if (!nj.contains("prob") || !nj.contains("price"))
      fail(ErrorCode::parse_error, where + " needs 'prob' and 'price'");
    n.prob = detail::parse_scalar<S>(nj.at("prob"), where + ".prob");
    if (!nj.at("price").is_array()) fail(ErrorCode::parse_error, where + ".price must be an array");
    for (const auto& x : nj.at("price")) n.price.push_back(detail::parse_scalar<S>(x, where + ".price"));
    nodes.push_back(std::move(n));
  }

  Model<S> model{ScenarioTree<S>(std::move(assets), std::move(nodes)), {}, std::nullopt};

  model.spec.base = detail::parse_fragment<S>(j.at("risk_measure"));
  if (j.at("risk_measure").contains("overrides")) {
    const auto& ov = j.at("risk_measure").at("overrides");
    if (!ov.is_object()) fail(ErrorCode::parse_error, "risk_measure.overrides must be an object");
    for (const auto& [key, val] : ov.items()) {
      NodeId id = 0;
      try {
        id = static_cast<NodeId>(std::stoll(key));
      } catch (const std::exception&) {
        fail(ErrorCode::parse_error, "bad node id '" + key + "' in overrides");
      }
      model.spec.overrides[id] = detail::parse_fragment<S>(val);
    }
  }

  if (j.contains("payoff")) {
    const auto& pj = j.at("payoff");
    if (!pj.is_object() || !pj.contains("time") || !pj.contains("values"))
      fail(ErrorCode::parse_error, "payoff needs 'time' and 'values'");
    NodeFunction<S> h;
    h.time = pj.at("time").template get<int>();
    for (const auto& [key, val] : pj.at("values").items()) {
      NodeId id = 0;
      try {
        id = static_cast<NodeId>(std::stoll(key));
      } catch (const std::exception&) {
        fail(ErrorCode::parse_error, "bad node id '" + key + "' in payoff.values");
      }
      h.values[id] = detail::parse_scalar<S>(val, "payoff.values");
    }
    check_node_function(model.tree, h);
    model.payoff = std::move(h);
  }
  return model;
}

template <class S>
inline Model<S> load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::parse_error, "cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model<S>(buf.str());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::parse_error, "cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace riskhedge
