#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <riskhedge/riskhedge.hpp>

namespace {

using riskhedge::Error;
using riskhedge::ErrorCode;
using riskhedge::OrderedJson;

struct Options {
  std::string command;
  std::string model_path;
  int time = 0;
  bool time_set = false;
  bool direct = false;
  std::string csv_path;
  int samples = 40;
  std::string tol_text;
  bool exact = false;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error:
    case ErrorCode::validation_error:
    case ErrorCode::malformed_problem:
    case ErrorCode::invalid_spec:
    case ErrorCode::maturity_mismatch:
    case ErrorCode::cone_empty_dual:
    case ErrorCode::not_a_parent:
      return 2;
    case ErrorCode::no_na:
      return 3;
    default:
      return 5;  // numerical failures and internal disagreements
  }
}

void emit(const OrderedJson& rep) { std::cout << rep.dump(2) << std::endl; }

double tol_for_report(const Options& opt) {
  if (opt.tol_text.empty()) return opt.exact ? 0.0 : 1e-9;
  try {
    return riskhedge::scalar_traits<double>::from_string(opt.tol_text);
  } catch (const std::exception&) {
    riskhedge::fail(ErrorCode::validation_error,
                    "--tol is not a number: '" + opt.tol_text + "'");
  }
}

template <class S>
OrderedJson verdicts_json(const std::vector<riskhedge::NodeVerdict<S>>& verdicts) {
  OrderedJson arr = OrderedJson::array();
  for (const auto& v : verdicts) {
    OrderedJson e;
    e["node"] = v.node;
    e["aip"] = v.aip;
    e["srn"] = v.srn;
    e["na"] = v.na;
    if (v.kernel) e["kernel"] = riskhedge::json_vector(*v.kernel);
    if (v.direction) e["direction"] = riskhedge::json_vector(*v.direction);
    arr.push_back(std::move(e));
  }
  return arr;
}

template <class S>
int run(const Options& opt, const std::string& text, OrderedJson& rep) {
  const S tol = opt.tol_text.empty() ? (riskhedge::scalar_traits<S>::exact
                                            ? S(0)
                                            : riskhedge::scalar_traits<S>::default_tol())
                                     : riskhedge::scalar_traits<S>::from_string(opt.tol_text);
  riskhedge::Model<S> model = riskhedge::load_model<S>(text);
  const riskhedge::ScenarioTree<S>& tree = model.tree;
  riskhedge::DynamicRiskMeasure<S> drm = riskhedge::build_dynamic(tree, model.spec, tol);

  if (opt.command == "validate") {
    rep["ok"] = true;
    rep["horizon"] = tree.horizon();
    rep["assets"] = tree.assets();
    rep["nodes"] = tree.size();
    rep["risk_variant"] = riskhedge::to_string(model.spec.base.variant);
    rep["overrides"] = model.spec.overrides.size();
    if (model.payoff)
      rep["payoff"] = OrderedJson{{"time", model.payoff->time}};
    else
      rep["payoff"] = "none";
    return 0;
  }

  if (opt.command == "check-na") {
    if (opt.time_set && (opt.time < 0 || opt.time >= tree.horizon()))
      riskhedge::fail(ErrorCode::not_a_parent,
                      "time " + std::to_string(opt.time) + " has no parent nodes (horizon " +
                          std::to_string(tree.horizon()) + ")");
    riskhedge::NaReport<S> na = riskhedge::check_na(tree, drm, tol);
    std::vector<riskhedge::NodeVerdict<S>> shown;
    bool all = true;
    for (const auto& v : na.verdicts) {
      if (opt.time_set && tree.node(v.node).time != opt.time) continue;
      shown.push_back(v);
      all = all && v.na;
    }
    rep["verdicts"] = verdicts_json(shown);
    rep["na"] = all;
    return all ? 0 : 3;
  }

  if (opt.command == "price") {
    if (!model.payoff)
      riskhedge::fail(ErrorCode::validation_error, "model has no payoff to price");
    riskhedge::PricingResult<S> pr = riskhedge::backward_price(tree, drm, *model.payoff, tol);
    OrderedJson levels = OrderedJson::array();
    for (int t = 0; t <= tree.horizon(); ++t)
      levels.push_back(OrderedJson{
          {"time", t},
          {"values", riskhedge::json_node_function(pr.prices[static_cast<std::size_t>(t)])}});
    rep["prices"] = std::move(levels);
    OrderedJson theta = OrderedJson::object();
    for (const auto& [id, th] : pr.theta) theta[std::to_string(id)] = riskhedge::json_vector(th);
    rep["theta"] = std::move(theta);
    OrderedJson attained = OrderedJson::object();
    for (const auto& [id, a] : pr.attained) attained[std::to_string(id)] = a;
    rep["attained"] = std::move(attained);
    rep["any_minus_infinity"] = pr.any_minus_infinity;

    if (opt.direct) {
      const int t = opt.time_set ? opt.time : 0;
      riskhedge::DirectPriceResult<S> dp = riskhedge::direct_price(tree, drm, *model.payoff, t, tol);
      double gap = 0;
      for (riskhedge::NodeId id : tree.at_time(t)) {
        const auto& bw = pr.prices[static_cast<std::size_t>(t)];
        if (bw.is_minus_inf(id) != dp.prices.is_minus_inf(id)) gap = 1e300;
        if (bw.is_minus_inf(id) || dp.prices.is_minus_inf(id)) continue;
        gap = std::max(gap, std::abs(riskhedge::scalar_traits<S>::to_double(bw.at(id)) -
                                     riskhedge::scalar_traits<S>::to_double(dp.prices.at(id))));
      }
      rep["direct"] = OrderedJson{{"time", t},
                                  {"values", riskhedge::json_node_function(dp.prices)},
                                  {"max_gap", riskhedge::report_round(gap)}};
    }
    if (!opt.csv_path.empty()) {
      std::ofstream out(opt.csv_path, std::ios::binary);
      if (!out)
        riskhedge::fail(ErrorCode::validation_error, "cannot write CSV to '" + opt.csv_path + "'");
      out << riskhedge::csv_price_report(tree, pr);
    }
    return pr.any_minus_infinity ? 4 : 0;
  }

  if (opt.command == "dual-price") {
    if (!model.payoff)
      riskhedge::fail(ErrorCode::validation_error, "model has no payoff to price");
    const int t = opt.time_set ? opt.time : 0;
    riskhedge::DualPriceResult<S> du = riskhedge::dual_price(tree, drm, *model.payoff, t, tol);
    riskhedge::PricingResult<S> pr = riskhedge::backward_price(tree, drm, *model.payoff, tol);
    double gap = 0;
    for (riskhedge::NodeId id : tree.at_time(t))
      gap = std::max(gap,
                     std::abs(riskhedge::scalar_traits<S>::to_double(du.prices.at(id)) -
                              riskhedge::scalar_traits<S>::to_double(
                                  pr.prices[static_cast<std::size_t>(t)].at(id))));
    riskhedge::MartingaleMeasure<S> mm = riskhedge::extract_witness_measure(tree, drm, tol);
    riskhedge::DualAttainmentReport<S> att = riskhedge::verify_dual_attainment(tree, drm, du);

    rep["na"] = true;
    rep["time"] = t;
    rep["prices"] = riskhedge::json_node_function(du.prices);
    OrderedJson kernels = OrderedJson::object();
    OrderedJson strict = OrderedJson::object();
    for (const auto& [id, q] : du.kernel) {
      kernels[std::to_string(id)] = riskhedge::json_vector(q);
      strict[std::to_string(id)] = du.strict.at(id);
    }
    rep["kernels"] = std::move(kernels);
    rep["strict"] = std::move(strict);
    OrderedJson witness;
    OrderedJson wk = OrderedJson::object();
    for (const auto& [id, q] : mm.kernels) wk[std::to_string(id)] = riskhedge::json_vector(q);
    witness["kernels"] = std::move(wk);
    OrderedJson lw = OrderedJson::object();
    for (const auto& [id, w] : mm.leaf_weights) lw[std::to_string(id)] = riskhedge::json_number(w);
    witness["leaf_weights"] = std::move(lw);
    witness["strictly_positive"] = mm.strictly_positive;
    rep["witness"] = std::move(witness);
    rep["primal_dual_gap"] = riskhedge::report_round(gap);
    rep["attainment"] = OrderedJson{{"pass", att.pass},
                                    {"blended", att.blended},
                                    {"worst_gap", riskhedge::report_round(att.worst_gap)}};
    return 0;
  }

  if (opt.command == "ftap") {
    riskhedge::FtapReport<S> fr = riskhedge::verify_ftap(tree, drm, opt.samples, 1234, tol);
    rep["na"] = fr.na;
    rep["hypothesis_support"] = fr.hypothesis_support;
    rep["polytopes_nonempty"] = fr.polytopes_nonempty;
    rep["polytopes_positive"] = fr.polytopes_positive;
    OrderedJson radii = OrderedJson::object();
    for (const auto& [id, r] : fr.interior_radius)
      radii[std::to_string(id)] = riskhedge::report_round(r);
    rep["interior_radius"] = std::move(radii);
    auto leg = [](const riskhedge::FtapLeg& l) {
      return OrderedJson{{"pass", l.pass}, {"checked", l.checked},
                         {"worst", riskhedge::report_round(l.worst)}};
    };
    rep["legs"] = OrderedJson{{"na_vs_dual", leg(fr.leg_i)},
                              {"attainable_acceptable", leg(fr.leg_ii)},
                              {"witness_domination", leg(fr.leg_iii)},
                              {"nonzero_expectation", leg(fr.leg_iv)}};
    OrderedJson ngd = OrderedJson::object();
    for (const auto& [t, ok] : fr.ngd) ngd[std::to_string(t)] = ok;
    rep["ngd"] = std::move(ngd);
    rep["ngd_matches_aip"] = fr.ngd_matches_aip;
    rep["empties_match_aip"] = fr.empties_match_aip;
    rep["full_equivalence"] = fr.full_equivalence;
    rep["consistent"] = fr.consistent;
    rep["verdicts"] = verdicts_json(fr.na_report.verdicts);
    rep["notes"] = fr.notes;
    return fr.consistent ? 0 : 5;
  }

  riskhedge::fail(ErrorCode::validation_error, "unknown command '" + opt.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Scenario-tree pricing under dynamic coherent risk measures"};
  app.add_option("command", opt.command, "validate | check-na | price | dual-price | ftap")
      ->required()
      ->check(CLI::IsMember({"validate", "check-na", "price", "dual-price", "ftap"}));
  app.add_option("model", opt.model_path, "model JSON path")->required();
  auto* time_opt = app.add_option("--time", opt.time, "evaluation time (default 0)");
  app.add_flag("--direct", opt.direct, "also compute direct multi-period prices");
  app.add_option("--csv", opt.csv_path, "write per-node price CSV here");
  app.add_option("--samples", opt.samples, "sample count for ftap checks");
  app.add_option("--tol", opt.tol_text, "numeric tolerance (default 1e-9)");
  app.add_flag("--exact", opt.exact, "exact rational arithmetic");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }
  opt.time_set = time_opt->count() > 0;

  std::string text;
  OrderedJson rep;
  try {
    text = riskhedge::read_file(opt.model_path);
    rep = riskhedge::report_skeleton(opt.command, riskhedge::model_digest(text),
                                     tol_for_report(opt), opt.exact);
    const int code = opt.exact ? run<riskhedge::Rational>(opt, text, rep)
                               : run<double>(opt, text, rep);
    emit(rep);
    return code;
  } catch (const Error& e) {
    rep["error"] = OrderedJson{{"code", riskhedge::to_string(e.code())},
                               {"message", e.what()},
                               {"details", e.details()}};
    emit(rep);
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    rep["error"] = OrderedJson{{"code", "INTERNAL"}, {"message", e.what()}};
    emit(rep);
    std::cerr << "error: " << e.what() << std::endl;
    return 5;
  }
}
