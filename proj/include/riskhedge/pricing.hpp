#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lp.hpp"
#include "parallel.hpp"
#include "risk.hpp"
#include "tree.hpp"

namespace riskhedge {

/// One-step hedging objective of a node,
///   g(x) = x . S_t + rho(x . S_{t+1} - V_{t+1})
///        = max over dual vertices q of (S_t - E_q S_{t+1}) . x + E_q V_{t+1},
/// a finite maximum of affine pieces in the position x.
template <class S>
struct GPiece {
  std::vector<S> slope;
  S intercept{};
};

template <class S>
struct GFunction {
  NodeId node = 0;
  int dim = 0;
  std::vector<GPiece<S>> pieces;

  S eval(const std::vector<S>& x) const {
    bool first = true;
    S best(0);
    for (const auto& p : pieces) {
      S v = p.intercept;
      for (int i = 0; i < dim; ++i) v += p.slope[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      if (first || best < v) {
        best = v;
        first = false;
      }
    }
    return best;
  }
};

/// next_values must hold one finite value per child of `id`.
template <class S>
inline GFunction<S> build_g(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                            NodeId id, const std::map<NodeId, S>& next_values) {
  const TreeNode<S>& n = tree.node(id);
  if (n.children.empty())
    fail(ErrorCode::not_a_parent, "node " + std::to_string(id) + " has no children");
  const OneStepRiskMeasure<S>& osm = drm.at(id);
  const int d = tree.dim();

  GFunction<S> g;
  g.node = id;
  g.dim = d;
  std::vector<std::vector<S>> child_prices;
  std::vector<S> vals;
  for (NodeId c : n.children) {
    child_prices.push_back(tree.node(c).price);
    auto it = next_values.find(c);
    if (it == next_values.end())
      fail(ErrorCode::validation_error, "missing next-step value at node " + std::to_string(c));
    vals.push_back(it->second);
  }
  for (const auto& q : osm.vertices) {
    GPiece<S> piece;
    piece.slope = n.price;
    piece.intercept = S(0);
    for (std::size_t j = 0; j < q.size(); ++j) {
      piece.intercept += q[j] * vals[j];
      for (int i = 0; i < d; ++i)
        piece.slope[static_cast<std::size_t>(i)] -= q[j] * child_prices[j][static_cast<std::size_t>(i)];
    }
    g.pieces.push_back(std::move(piece));
  }
  return g;
}

template <class S>
struct GMinimum {
  LpStatus status = LpStatus::optimal;
  S value{};             // finite minimum iff status == optimal
  std::vector<S> arg;    // minimizing position iff optimal
  std::vector<S> ray;    // descent direction iff unbounded
  bool attained = false;
  bool degenerate = false;
};

/// Epigraph program min tau s.t. tau >= slope . x + intercept for each piece.
template <class S>
inline GMinimum<S> minimize_g(const GFunction<S>& g, S tol = scalar_traits<S>::default_tol()) {
  const int d = g.dim;
  LpProblem<S> lp;
  lp.num_vars = d + 1;  // x coordinates then tau
  lp.objective.assign(static_cast<std::size_t>(d) + 1, S(0));
  lp.objective.back() = S(1);
  for (const auto& p : g.pieces) {
    std::vector<S> row(static_cast<std::size_t>(d) + 1);
    for (int i = 0; i < d; ++i) row[static_cast<std::size_t>(i)] = p.slope[static_cast<std::size_t>(i)];
    row.back() = S(-1);
    lp.ineq_lhs.push_back(std::move(row));
    lp.ineq_rhs.push_back(S(-p.intercept));
  }
  LpOutcome<S> out = riskhedge::solve(lp, LpOptions<S>{tol});

  GMinimum<S> res;
  res.status = out.status;
  if (out.status == LpStatus::optimal) {
    res.value = out.value;
    res.arg.assign(out.primal_point.begin(), out.primal_point.begin() + d);
    res.attained = true;
    res.degenerate = out.degenerate;
  } else if (out.status == LpStatus::unbounded) {
    res.ray.assign(out.ray.begin(), out.ray.begin() + d);
  } else {
    fail(ErrorCode::numerical_failure, "epigraph program reported infeasible");
  }
  return res;
}

template <class S>
struct PricingResult {
  std::vector<NodeFunction<S>> prices;            // indexed by time 0..T
  std::map<NodeId, std::vector<S>> theta;         // minimizer per non-terminal node
  std::map<NodeId, bool> attained;                // per non-terminal node
  std::map<NodeId, std::vector<S>> ray;           // descent direction where unbounded
  std::map<NodeId, bool> degenerate;              // multiple optimal hedges hinted
  bool any_minus_infinity = false;
};

/// Super-hedging prices by backward induction: P_T = payoff, then per node the
/// minimum of g built from the children's prices. A node with any child at
/// -infinity is -infinity itself.
template <class S>
inline PricingResult<S> backward_price(const ScenarioTree<S>& tree,
                                       const DynamicRiskMeasure<S>& drm,
                                       const NodeFunction<S>& payoff,
                                       S tol = scalar_traits<S>::default_tol()) {
  if (payoff.time != tree.horizon())
    fail(ErrorCode::maturity_mismatch, "payoff must live at the tree horizon");
  check_node_function(tree, payoff);

  PricingResult<S> res;
  res.prices.resize(static_cast<std::size_t>(tree.horizon()) + 1);
  res.prices[static_cast<std::size_t>(tree.horizon())] = payoff;

  for (int t = tree.horizon() - 1; t >= 0; --t) {
    const NodeFunction<S>& next = res.prices[static_cast<std::size_t>(t) + 1];
    NodeFunction<S>& cur = res.prices[static_cast<std::size_t>(t)];
    cur.time = t;
    const std::vector<NodeId>& ids = tree.at_time(t);
    std::vector<GMinimum<S>> mins(ids.size());
    std::vector<char> broken(ids.size(), 0);
    parallel_for(ids.size(), [&](std::size_t k) {
      const TreeNode<S>& n = tree.node(ids[k]);
      for (NodeId c : n.children)
        if (next.is_minus_inf(c)) {
          broken[k] = 1;
          return;
        }
      mins[k] = minimize_g(build_g(tree, drm, ids[k], next.values), tol);
    });
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const NodeId id = ids[k];
      if (broken[k] || mins[k].status == LpStatus::unbounded) {
        cur.values[id] = S(0);
        cur.minus_infinity.insert(id);
        res.attained[id] = false;
        if (!broken[k]) res.ray[id] = mins[k].ray;
        res.any_minus_infinity = true;
        continue;
      }
      cur.values[id] = mins[k].value;
      res.theta[id] = mins[k].arg;
      res.attained[id] = true;
      res.degenerate[id] = mins[k].degenerate;
    }
  }
  return res;
}

namespace detail {

/// Multi-period program of one subtree: variables are a hedge theta(n) and an
/// epigraph scalar tau(n) for every non-terminal subtree node; each dual
/// vertex q of n contributes
///   tau(n) >= sum_j q_j (w_j - theta(n) . dS_j),
/// where w_j is tau(child) for internal children and the payoff at leaves.
template <class S>
inline LpOutcome<S> direct_subtree_lp(const ScenarioTree<S>& tree,
                                      const DynamicRiskMeasure<S>& drm, NodeId top,
                                      const NodeFunction<S>& payoff, const S& tol) {
  const int d = tree.dim();
  std::vector<NodeId> internal;
  for (NodeId k : tree.subtree(top))
    if (tree.node(k).time < tree.horizon()) internal.push_back(k);
  std::map<NodeId, int> tau_index;
  for (std::size_t i = 0; i < internal.size(); ++i)
    tau_index[internal[i]] = static_cast<int>(i);
  const int ntau = static_cast<int>(internal.size());
  const int nvars = ntau * (1 + d);
  auto theta_index = [&](int node_pos, int coord) { return ntau + node_pos * d + coord; };

  LpProblem<S> lp;
  lp.num_vars = nvars;
  lp.objective.assign(static_cast<std::size_t>(nvars), S(0));
  lp.objective[static_cast<std::size_t>(tau_index.at(top))] = S(1);

  for (int pos = 0; pos < ntau; ++pos) {
    const NodeId id = internal[static_cast<std::size_t>(pos)];
    const TreeNode<S>& n = tree.node(id);
    const OneStepRiskMeasure<S>& osm = drm.at(id);
    std::vector<std::vector<S>> ds;
    for (NodeId c : n.children) ds.push_back(tree.delta_S(c));
    for (const auto& q : osm.vertices) {
      std::vector<S> row(static_cast<std::size_t>(nvars), S(0));
      S rhs(0);
      row[static_cast<std::size_t>(tau_index.at(id))] = S(-1);
      for (std::size_t j = 0; j < n.children.size(); ++j) {
        const NodeId c = n.children[j];
        for (int i = 0; i < d; ++i)
          row[static_cast<std::size_t>(theta_index(pos, i))] -= q[j] * ds[j][static_cast<std::size_t>(i)];
        if (tree.node(c).time == tree.horizon())
          rhs -= q[j] * payoff.at(c);
        else
          row[static_cast<std::size_t>(tau_index.at(c))] += q[j];
      }
      lp.ineq_lhs.push_back(std::move(row));
      lp.ineq_rhs.push_back(rhs);
    }
  }
  return riskhedge::solve(lp, LpOptions<S>{tol});
}

}  // namespace detail

template <class S>
struct DirectPriceResult {
  NodeFunction<S> prices;                  // at the requested time
  std::map<NodeId, std::vector<S>> theta;  // hedge at each priced node itself
  // per priced node: the whole optimal strategy (or descent direction when
  // unbounded), keyed by the non-terminal subtree node it acts at
  std::map<NodeId, std::map<NodeId, std::vector<S>>> strategy;
  std::map<NodeId, std::map<NodeId, std::vector<S>>> ray;
};

/// Prices every time-t node through a single program over all strategies of
/// its subtree; equals the backward recursion value.
template <class S>
inline DirectPriceResult<S> direct_price(const ScenarioTree<S>& tree,
                                         const DynamicRiskMeasure<S>& drm,
                                         const NodeFunction<S>& payoff, int t,
                                         S tol = scalar_traits<S>::default_tol()) {
  if (payoff.time != tree.horizon())
    fail(ErrorCode::maturity_mismatch, "payoff must live at the tree horizon");
  check_node_function(tree, payoff);
  if (t < 0 || t > tree.horizon())
    fail(ErrorCode::validation_error, "pricing time outside horizon");

  DirectPriceResult<S> res;
  res.prices.time = t;
  if (t == tree.horizon()) {
    res.prices = payoff;
    return res;
  }
  const std::vector<NodeId>& ids = tree.at_time(t);
  std::vector<LpOutcome<S>> outs(ids.size());
  parallel_for(ids.size(), [&](std::size_t k) {
    outs[k] = detail::direct_subtree_lp(tree, drm, ids[k], payoff, tol);
  });
  const int d = tree.dim();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const NodeId id = ids[k];
    LpOutcome<S>& out = outs[k];
    std::vector<NodeId> internal;
    for (NodeId kk : tree.subtree(id))
      if (tree.node(kk).time < tree.horizon()) internal.push_back(kk);
    const long ntau = static_cast<long>(internal.size());
    auto slice = [&](const std::vector<S>& flat) {
      std::map<NodeId, std::vector<S>> per_node;
      for (long p = 0; p < ntau; ++p) {
        const std::size_t off = static_cast<std::size_t>(ntau + p * d);
        per_node[internal[static_cast<std::size_t>(p)]] =
            std::vector<S>(flat.begin() + off, flat.begin() + off + d);
      }
      return per_node;
    };
    if (out.status == LpStatus::unbounded) {
      res.prices.values[id] = S(0);
      res.prices.minus_infinity.insert(id);
      res.ray[id] = slice(out.ray);
      continue;
    }
    if (out.status != LpStatus::optimal)
      fail(ErrorCode::numerical_failure, "direct pricing program reported infeasible");
    res.prices.values[id] = out.value;
    res.strategy[id] = slice(out.primal_point);
    res.theta[id] = res.strategy[id].at(id);
  }
  return res;
}

template <class S>
struct PriceBoundsReport {
  bool pass = true;
  double min_slack = 0;  // most negative slack across both bounds
  long nodes_checked = 0;
};

/// Theorem-level sandwich at every non-terminal node with finite prices:
///   rho_t(-V_{t+1}) >= P*_t >= -rho_t(V_{t+1}).
template <class S>
inline PriceBoundsReport<S> verify_price_bounds(const ScenarioTree<S>& tree,
                                                const DynamicRiskMeasure<S>& drm,
                                                const PricingResult<S>& pr,
                                                S tol = scalar_traits<S>::default_tol()) {
  PriceBoundsReport<S> rep;
  for (int t = 0; t < tree.horizon(); ++t) {
    const NodeFunction<S>& cur = pr.prices[static_cast<std::size_t>(t)];
    const NodeFunction<S>& next = pr.prices[static_cast<std::size_t>(t) + 1];
    for (NodeId id : tree.at_time(t)) {
      if (cur.is_minus_inf(id)) continue;
      bool child_broken = false;
      for (NodeId c : tree.node(id).children) child_broken = child_broken || next.is_minus_inf(c);
      if (child_broken) continue;
      std::vector<S> nv = child_values(tree, id, next.values);
      std::vector<S> nneg = nv;
      for (S& v : nneg) v = -v;
      const S upper = rho_vertex_max(drm.at(id), nneg);  // rho_t(-V_{t+1})
      const S lower = S(-rho_vertex_max(drm.at(id), nv));
      const S p = cur.at(id);
      const S s1 = S(upper - p);
      const S s2 = S(p - lower);
      const double slack = std::min(scalar_traits<S>::to_double(s1), scalar_traits<S>::to_double(s2));
      rep.min_slack = std::min(rep.min_slack, slack);
      if (s1 < -tol || s2 < -tol) rep.pass = false;
      ++rep.nodes_checked;
    }
  }
  return rep;
}

struct LineCaseCount {
  long constant_checked = 0;
  long coercive_checked = 0;
  long skipped = 0;
};

template <class S>
struct LineBehaviorReport {
  bool pass = true;
  double max_violation = 0;
  LineCaseCount cases;
};

/// Behavior of g along lines r z for r in `radii`:
/// both one-step risks of +-(z . dS) zero -> g constant on the line; both
/// positive -> coercive lower bound |r| min(rho(z.dS), rho(-z.dS)) - rho(V_{t+1}).
/// One-sided directions are skipped (counted).
template <class S>
inline LineBehaviorReport<S> verify_line_behavior(const ScenarioTree<S>& tree,
                                                  const DynamicRiskMeasure<S>& drm,
                                                  const PricingResult<S>& pr,
                                                  const std::vector<std::vector<S>>& directions,
                                                  const std::vector<S>& radii,
                                                  S tol = scalar_traits<S>::default_tol()) {
  LineBehaviorReport<S> rep;
  const int d = tree.dim();
  for (int t = 0; t < tree.horizon(); ++t) {
    const NodeFunction<S>& next = pr.prices[static_cast<std::size_t>(t) + 1];
    for (NodeId id : tree.at_time(t)) {
      const TreeNode<S>& n = tree.node(id);
      bool broken = false;
      for (NodeId c : n.children) broken = broken || next.is_minus_inf(c);
      if (broken) continue;
      const OneStepRiskMeasure<S>& osm = drm.at(id);
      GFunction<S> g = build_g(tree, drm, id, next.values);
      std::vector<S> nv = child_values(tree, id, next.values);
      const S rho_h = rho_vertex_max(drm.at(id), nv);

      for (const auto& z : directions) {
        std::vector<S> zds;
        for (NodeId c : n.children) {
          std::vector<S> ds = tree.delta_S(c);
          S acc(0);
          for (int i = 0; i < d; ++i) acc += z[static_cast<std::size_t>(i)] * ds[static_cast<std::size_t>(i)];
          zds.push_back(acc);
        }
        std::vector<S> mzds = zds;
        for (S& v : mzds) v = -v;
        const S rp = rho_vertex_max(osm, zds);
        const S rm = rho_vertex_max(osm, mzds);

        std::vector<S> zero(static_cast<std::size_t>(d), S(0));
        const S g0 = g.eval(zero);
        if (abs_of(rp) <= tol && abs_of(rm) <= tol) {
          ++rep.cases.constant_checked;
          for (const S& r : radii) {
            std::vector<S> x(z);
            for (S& v : x) v *= r;
            const S dv = abs_of(S(g.eval(x) - g0));
            const double viol = scalar_traits<S>::to_double(dv);
            rep.max_violation = std::max(rep.max_violation, viol);
            if (dv > tol) rep.pass = false;
          }
        } else if (rp > tol && rm > tol) {
          ++rep.cases.coercive_checked;
          const S floor = min_of(rp, rm);
          for (const S& r : radii) {
            std::vector<S> x(z);
            for (S& v : x) v *= r;
            const S bound = S(abs_of(r) * floor - rho_h);
            const S gap = S(bound - g.eval(x));  // must be <= 0
            const double viol = scalar_traits<S>::to_double(gap);
            rep.max_violation = std::max(rep.max_violation, std::max(0.0, viol));
            if (gap > tol) rep.pass = false;
          }
        } else {
          ++rep.cases.skipped;
        }
      }
    }
  }
  return rep;
}

}  // namespace riskhedge
