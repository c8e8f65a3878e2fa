#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lp.hpp"
#include "parallel.hpp"
#include "pricing.hpp"
#include "risk.hpp"
#include "tree.hpp"

namespace riskhedge {

/// One vector E_q(dS | node) per dual vertex q; z -> rho(z . dS)(node)
/// equals max over these vectors of -z . v.
template <class S>
struct MomentVectors {
  NodeId node = 0;
  std::vector<std::vector<S>> vectors;
};

template <class S>
inline MomentVectors<S> moment_vectors(const ScenarioTree<S>& tree,
                                       const DynamicRiskMeasure<S>& drm, NodeId id) {
  const TreeNode<S>& n = tree.node(id);
  const OneStepRiskMeasure<S>& osm = drm.at(id);
  const int d = tree.dim();
  MomentVectors<S> mv;
  mv.node = id;
  std::vector<std::vector<S>> ds;
  for (NodeId c : n.children) ds.push_back(tree.delta_S(c));
  for (const auto& q : osm.vertices) {
    std::vector<S> v(static_cast<std::size_t>(d), S(0));
    for (std::size_t j = 0; j < q.size(); ++j)
      for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] += q[j] * ds[j][static_cast<std::size_t>(i)];
    mv.vectors.push_back(std::move(v));
  }
  return mv;
}

namespace detail {

template <class S>
inline S vector_scale(const std::vector<std::vector<S>>& vs) {
  S scale(1);
  for (const auto& v : vs)
    for (const S& x : v) scale = max_of(scale, abs_of(x));
  return scale;
}

/// Scales z to unit max-norm; leaves the zero vector alone.
template <class S>
inline void normalize_max(std::vector<S>& z) {
  S m(0);
  for (const S& x : z) m = max_of(m, abs_of(x));
  if (m > S(0))
    for (S& x : z) x /= m;
}

}  // namespace detail

template <class S>
struct AipResult {
  bool holds = false;
  std::vector<S> kernel;     // martingale kernel over children, when holds
  std::vector<S> direction;  // unit max-norm z with rho(z . dS) < 0, when not
  S rho_direction{};         // that (negative) risk value
};

/// Instantaneous-profit check at one node: the map z -> rho(z . dS) is
/// nonnegative everywhere iff 0 lies in the convex hull of the moment
/// vectors. Tested by minimizing the L1 residual of 0 = sum lambda_q v_q over
/// the simplex, which also yields the kernel witness q* = sum lambda_q q.
template <class S>
inline AipResult<S> check_aip(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                              NodeId id, S tol = scalar_traits<S>::default_tol()) {
  const OneStepRiskMeasure<S>& osm = drm.at(id);
  MomentVectors<S> mv = moment_vectors(tree, drm, id);
  const int d = tree.dim();
  const int m = static_cast<int>(mv.vectors.size());
  const S scale = detail::vector_scale(mv.vectors);

  LpProblem<S> hull;
  hull.num_vars = m + 2 * d;  // lambda then s+, s- residual slacks
  hull.objective.assign(static_cast<std::size_t>(hull.num_vars), S(1));
  for (int k = 0; k < m; ++k) hull.objective[static_cast<std::size_t>(k)] = S(0);
  hull.lower.assign(static_cast<std::size_t>(hull.num_vars), std::optional<S>(S(0)));
  hull.upper.assign(static_cast<std::size_t>(hull.num_vars), std::nullopt);
  {
    std::vector<S> row(static_cast<std::size_t>(hull.num_vars), S(0));
    for (int k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = S(1);
    hull.eq_lhs.push_back(std::move(row));
    hull.eq_rhs.push_back(S(1));
  }
  for (int i = 0; i < d; ++i) {
    std::vector<S> row(static_cast<std::size_t>(hull.num_vars), S(0));
    for (int k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = mv.vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    row[static_cast<std::size_t>(m + i)] = S(1);
    row[static_cast<std::size_t>(m + d + i)] = S(-1);
    hull.eq_lhs.push_back(std::move(row));
    hull.eq_rhs.push_back(S(0));
  }
  LpOutcome<S> hull_out = riskhedge::solve(hull, LpOptions<S>{tol});
  if (hull_out.status != LpStatus::optimal)
    fail(ErrorCode::numerical_failure, "hull-membership program did not solve");

  AipResult<S> res;
  if (hull_out.value <= S(tol * max_of(S(1), scale))) {
    res.holds = true;
    const std::size_t nc = tree.node(id).children.size();
    res.kernel.assign(nc, S(0));
    S total(0);
    for (int k = 0; k < m; ++k) {
      const S lam = hull_out.primal_point[static_cast<std::size_t>(k)];
      total += lam;
      for (std::size_t j = 0; j < nc; ++j) res.kernel[j] += lam * osm.vertices[static_cast<std::size_t>(k)][j];
    }
    for (S& v : res.kernel) v /= total;
    return res;
  }

  // Separation: maximize eps with z . v_q >= eps for all q, z in [-1,1]^d.
  LpProblem<S> sep;
  sep.num_vars = d + 1;
  sep.objective.assign(static_cast<std::size_t>(d) + 1, S(0));
  sep.objective.back() = S(-1);  // minimize -eps
  sep.lower.assign(static_cast<std::size_t>(d) + 1, std::optional<S>(S(-1)));
  sep.upper.assign(static_cast<std::size_t>(d) + 1, std::optional<S>(S(1)));
  sep.lower.back() = std::nullopt;
  sep.upper.back() = std::nullopt;
  for (const auto& v : mv.vectors) {
    std::vector<S> row(static_cast<std::size_t>(d) + 1, S(0));
    for (int i = 0; i < d; ++i) row[static_cast<std::size_t>(i)] = -v[static_cast<std::size_t>(i)];
    row.back() = S(1);
    sep.ineq_lhs.push_back(std::move(row));
    sep.ineq_rhs.push_back(S(0));
  }
  LpOutcome<S> sep_out = riskhedge::solve(sep, LpOptions<S>{tol});
  if (sep_out.status != LpStatus::optimal)
    fail(ErrorCode::numerical_failure, "separation program did not solve");
  res.holds = false;
  res.direction.assign(sep_out.primal_point.begin(), sep_out.primal_point.begin() + d);
  detail::normalize_max(res.direction);
  bool first = true;
  for (const auto& v : mv.vectors) {
    S dotv(0);
    for (int i = 0; i < d; ++i) dotv += res.direction[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    if (first || S(-dotv) > res.rho_direction) res.rho_direction = S(-dotv);
    first = false;
  }
  return res;
}

template <class S>
struct SrnResult {
  bool holds = false;
  std::vector<S> direction;  // one-sided risk-neutral z (unit max-norm) when not
  S gain{};                  // LP objective sum z . v_q at the witness
};

/// Symmetric-risk-neutrality at one node: the acceptance cone
/// K = {z : z . v >= 0 for all moment vectors v} must be a linear space.
/// LP: maximize sum_v z . v over K intersect [-1,1]^d; zero optimum iff
/// every z in K annihilates all v.
template <class S>
inline SrnResult<S> check_srn(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                              NodeId id, S tol = scalar_traits<S>::default_tol()) {
  MomentVectors<S> mv = moment_vectors(tree, drm, id);
  const int d = tree.dim();
  const S scale = detail::vector_scale(mv.vectors);

  LpProblem<S> lp;
  lp.num_vars = d;
  lp.objective.assign(static_cast<std::size_t>(d), S(0));
  for (const auto& v : mv.vectors)
    for (int i = 0; i < d; ++i) lp.objective[static_cast<std::size_t>(i)] -= v[static_cast<std::size_t>(i)];  // minimize -sum
  lp.lower.assign(static_cast<std::size_t>(d), std::optional<S>(S(-1)));
  lp.upper.assign(static_cast<std::size_t>(d), std::optional<S>(S(1)));
  for (const auto& v : mv.vectors) {
    std::vector<S> row(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) row[static_cast<std::size_t>(i)] = -v[static_cast<std::size_t>(i)];
    lp.ineq_lhs.push_back(std::move(row));
    lp.ineq_rhs.push_back(S(0));
  }
  LpOutcome<S> out = riskhedge::solve(lp, LpOptions<S>{tol});
  if (out.status != LpStatus::optimal)
    fail(ErrorCode::numerical_failure, "risk-neutral cone program did not solve");

  SrnResult<S> res;
  const S gain = S(-out.value);
  const S thresh = S(tol * max_of(S(1), scale) * S(static_cast<int>(mv.vectors.size()) + 1));
  if (gain <= thresh) {
    res.holds = true;
    return res;
  }
  res.holds = false;
  res.gain = gain;
  res.direction = out.primal_point;
  detail::normalize_max(res.direction);
  return res;
}

template <class S>
struct NodeVerdict {
  NodeId node = 0;
  bool aip = false;
  bool srn = false;
  bool na = false;
  std::optional<std::vector<S>> kernel;     // martingale kernel when aip holds
  std::optional<std::vector<S>> direction;  // arbitrage direction when a check fails
};

template <class S>
struct NaReport {
  std::vector<NodeVerdict<S>> verdicts;  // one per non-terminal node, by id
  bool all = false;
};

template <class S>
inline NaReport<S> check_na(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                            S tol = scalar_traits<S>::default_tol()) {
  std::vector<NodeId> ids;
  for (int t = 0; t < tree.horizon(); ++t)
    for (NodeId id : tree.at_time(t)) ids.push_back(id);

  NaReport<S> rep;
  rep.verdicts.resize(ids.size());
  parallel_for(ids.size(), [&](std::size_t k) {
    const NodeId id = ids[k];
    AipResult<S> a = check_aip(tree, drm, id, tol);
    SrnResult<S> s = check_srn(tree, drm, id, tol);
    NodeVerdict<S>& v = rep.verdicts[k];
    v.node = id;
    v.aip = a.holds;
    v.srn = s.holds;
    v.na = a.holds && s.holds;
    if (a.holds) v.kernel = a.kernel;
    if (!a.holds)
      v.direction = a.direction;
    else if (!s.holds)
      v.direction = s.direction;
  });
  rep.all = true;
  for (const auto& v : rep.verdicts) rep.all = rep.all && v.na;
  return rep;
}

template <class S>
struct ClassicalEntry {
  NodeId node = 0;
  bool na = false;        // worst-case risk verdict
  bool classical = false; // strictly positive martingale kernel exists
  std::vector<S> kernel;  // the classical kernel when it exists
};

template <class S>
struct ClassicalReport {
  std::vector<ClassicalEntry<S>> entries;
  bool pass = true;
};

/// Under the worst-case measure the risk-based no-arbitrage verdict must
/// coincide with the classical one (a strictly positive one-step martingale
/// kernel exists). Throws DISAGREEMENT when a node differs.
template <class S>
inline ClassicalReport<S> check_classical_equivalence(const ScenarioTree<S>& tree,
                                                      S tol = scalar_traits<S>::default_tol()) {
  RiskMeasureSpec<S> spec;
  spec.base.variant = RiskVariant::worst_case;
  DynamicRiskMeasure<S> drm = build_dynamic(tree, spec, tol);
  NaReport<S> na = check_na(tree, drm, tol);

  ClassicalReport<S> rep;
  const int d = tree.dim();
  for (const auto& v : na.verdicts) {
    const TreeNode<S>& n = tree.node(v.node);
    const std::size_t nc = n.children.size();
    S scale(1);
    std::vector<std::vector<S>> ds;
    for (NodeId c : n.children) {
      ds.push_back(tree.delta_S(c));
      for (const S& x : ds.back()) scale = max_of(scale, abs_of(x));
    }

    // maximize eps s.t. q_j - eps >= 0, sum q = 1, sum q_j dS_j = 0
    LpProblem<S> lp;
    lp.num_vars = static_cast<int>(nc) + 1;
    lp.objective.assign(nc + 1, S(0));
    lp.objective.back() = S(-1);
    lp.lower.assign(nc + 1, std::optional<S>(S(0)));
    lp.upper.assign(nc + 1, std::optional<S>(S(1)));
    for (std::size_t j = 0; j < nc; ++j) {
      std::vector<S> row(nc + 1, S(0));
      row[j] = -S(1);
      row.back() = S(1);
      lp.ineq_lhs.push_back(std::move(row));
      lp.ineq_rhs.push_back(S(0));
    }
    {
      std::vector<S> row(nc + 1, S(0));
      for (std::size_t j = 0; j < nc; ++j) row[j] = S(1);
      lp.eq_lhs.push_back(std::move(row));
      lp.eq_rhs.push_back(S(1));
    }
    for (int i = 0; i < d; ++i) {
      std::vector<S> row(nc + 1, S(0));
      for (std::size_t j = 0; j < nc; ++j) row[j] = ds[j][static_cast<std::size_t>(i)];
      lp.eq_lhs.push_back(std::move(row));
      lp.eq_rhs.push_back(S(0));
    }
    LpOutcome<S> out = riskhedge::solve(lp, LpOptions<S>{tol});

    ClassicalEntry<S> e;
    e.node = v.node;
    e.na = v.na;
    if (out.status == LpStatus::optimal && S(-out.value) > S(tol * scale)) {
      e.classical = true;
      e.kernel.assign(out.primal_point.begin(), out.primal_point.begin() + static_cast<long>(nc));
    }
    if (e.na != e.classical) {
      rep.pass = false;
      fail(ErrorCode::disagreement,
           "risk-based and classical no-arbitrage verdicts differ",
           {"node " + std::to_string(v.node),
            std::string("risk-based: ") + (e.na ? "holds" : "fails"),
            std::string("classical: ") + (e.classical ? "holds" : "fails")});
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

template <class S>
struct NgdResult {
  bool holds = false;
  NodeFunction<S> best_gain;  // m(node) = least achievable risk of a costless position
  std::map<NodeId, std::map<NodeId, std::vector<S>>> ray;  // descent strategies
};

/// No-good-deal at time t: no strategy on any time-t subtree makes the
/// composed risk of its accumulated gains negative. m(node) <= 0 always
/// (the zero strategy), so NGD at t means m = 0 at every time-t node.
template <class S>
inline NgdResult<S> check_ngd(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                              int t, S tol = scalar_traits<S>::default_tol()) {
  NodeFunction<S> zero;
  zero.time = tree.horizon();
  for (NodeId id : tree.at_time(tree.horizon())) zero.values[id] = S(0);
  DirectPriceResult<S> dp = direct_price(tree, drm, zero, t, tol);

  NgdResult<S> res;
  res.best_gain = dp.prices;
  res.ray = dp.ray;
  res.holds = true;
  for (NodeId id : tree.at_time(t)) {
    if (dp.prices.is_minus_inf(id)) {
      res.holds = false;
      continue;
    }
    if (abs_of(dp.prices.at(id)) > tol) res.holds = false;
  }
  return res;
}

}  // namespace riskhedge
