#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "pricing.hpp"
#include "scalar.hpp"
#include "tree.hpp"

namespace riskhedge {

inline constexpr const char* version_string = "0.1.0";

using OrderedJson = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string model_digest(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

/// Rounds through %.12g so identical inputs yield byte-identical reports.
inline double report_round(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

template <class S>
inline OrderedJson json_number(const S& v) {
  return report_round(scalar_traits<S>::to_double(v));
}

template <class S>
inline OrderedJson json_vector(const std::vector<S>& v) {
  OrderedJson out = OrderedJson::array();
  for (const S& x : v) out.push_back(json_number(x));
  return out;
}

/// {node-id: value} with "-inf" strings where the function is flagged.
template <class S>
inline OrderedJson json_node_function(const NodeFunction<S>& f) {
  OrderedJson out = OrderedJson::object();
  for (const auto& [id, v] : f.values) {
    if (f.is_minus_inf(id))
      out[std::to_string(id)] = "-inf";
    else
      out[std::to_string(id)] = json_number(v);
  }
  return out;
}

inline OrderedJson report_skeleton(const std::string& command, const std::string& digest,
                                   double tol, bool exact) {
  OrderedJson rep;
  rep["command"] = command;
  rep["version"] = version_string;
  rep["model_digest"] = digest;
  rep["tolerances"] = OrderedJson{{"tol", report_round(tol)}, {"exact", exact}};
  return rep;
}

/// node_id,time,price,attained,theta_1..theta_d for every node; leaves carry
/// the payoff with empty strategy cells, unbounded nodes the "-inf" marker.
template <class S>
inline std::string csv_price_report(const ScenarioTree<S>& tree, const PricingResult<S>& pr) {
  const int d = tree.dim();
  std::string out = "node_id,time,price,attained";
  for (int i = 1; i <= d; ++i) out += ",theta_" + std::to_string(i);
  out += "\n";
  char buf[64];
  for (int t = 0; t <= tree.horizon(); ++t) {
    const NodeFunction<S>& level = pr.prices[static_cast<std::size_t>(t)];
    for (NodeId id : tree.at_time(t)) {
      out += std::to_string(id) + "," + std::to_string(t) + ",";
      if (level.is_minus_inf(id)) {
        out += "-inf";
      } else {
        std::snprintf(buf, sizeof(buf), "%.12g", scalar_traits<S>::to_double(level.at(id)));
        out += buf;
      }
      const bool leaf = t == tree.horizon();
      const auto att = pr.attained.find(id);
      out += leaf ? ",true" : (att != pr.attained.end() && att->second ? ",true" : ",false");
      const auto th = pr.theta.find(id);
      for (int i = 0; i < d; ++i) {
        out += ",";
        if (!leaf && th != pr.theta.end()) {
          std::snprintf(buf, sizeof(buf), "%.12g",
                        scalar_traits<S>::to_double(th->second[static_cast<std::size_t>(i)]));
          out += buf;
        }
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace riskhedge
