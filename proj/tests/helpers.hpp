#pragma once

// Shared fixtures for the test suite: canonical small markets, random
// instance generators (arbitrage-free by construction, plus mutations that
// destroy the property), and small brute-force oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include <riskhedge/riskhedge.hpp>

namespace helpers {

using riskhedge::DynamicRiskMeasure;
using riskhedge::NodeFunction;
using riskhedge::NodeId;
using riskhedge::RiskFragment;
using riskhedge::RiskMeasureSpec;
using riskhedge::RiskVariant;
using riskhedge::ScenarioTree;
using riskhedge::TreeNode;

template <class S>
inline TreeNode<S> mknode(NodeId id, int time, std::optional<NodeId> parent, S prob,
                          std::vector<S> price) {
  TreeNode<S> n;
  n.id = id;
  n.time = time;
  n.parent = parent;
  n.prob = prob;
  n.price = std::move(price);
  return n;
}

template <class S>
inline S frac(long num, long den) {
  return S(num) / S(den);
}

// One period, one asset: 1 -> {2, 1/2}, both branches probability 1/2.
template <class S = double>
inline ScenarioTree<S> binomial_tree() {
  std::vector<TreeNode<S>> nodes;
  nodes.push_back(mknode<S>(0, 0, std::nullopt, S(1), {S(1)}));
  nodes.push_back(mknode<S>(1, 1, 0, frac<S>(1, 2), {S(2)}));
  nodes.push_back(mknode<S>(2, 1, 0, frac<S>(1, 2), {frac<S>(1, 2)}));
  return ScenarioTree<S>({"S"}, std::move(nodes));
}

// Strike-1 call on the binomial tree.
template <class S = double>
inline NodeFunction<S> binomial_call() {
  NodeFunction<S> h;
  h.time = 1;
  h.values[1] = S(1);
  h.values[2] = S(0);
  return h;
}

// One period, one asset: 1 -> {2, 1, 1/2}, each branch probability 1/3.
template <class S = double>
inline ScenarioTree<S> trinomial_tree() {
  std::vector<TreeNode<S>> nodes;
  nodes.push_back(mknode<S>(0, 0, std::nullopt, S(1), {S(1)}));
  nodes.push_back(mknode<S>(1, 1, 0, frac<S>(1, 3), {S(2)}));
  nodes.push_back(mknode<S>(2, 1, 0, frac<S>(1, 3), {S(1)}));
  nodes.push_back(mknode<S>(3, 1, 0, frac<S>(1, 3), {frac<S>(1, 2)}));
  return ScenarioTree<S>({"S"}, std::move(nodes));
}

template <class S = double>
inline NodeFunction<S> trinomial_call() {
  NodeFunction<S> h;
  h.time = 1;
  h.values[1] = S(1);
  h.values[2] = S(0);
  h.values[3] = S(0);
  return h;
}

// Two periods of the binomial dynamics, non-recombining ids.
template <class S = double>
inline ScenarioTree<S> two_period_tree() {
  std::vector<TreeNode<S>> nodes;
  nodes.push_back(mknode<S>(0, 0, std::nullopt, S(1), {S(1)}));
  nodes.push_back(mknode<S>(1, 1, 0, frac<S>(1, 2), {S(2)}));
  nodes.push_back(mknode<S>(2, 1, 0, frac<S>(1, 2), {frac<S>(1, 2)}));
  nodes.push_back(mknode<S>(3, 2, 1, frac<S>(1, 2), {S(4)}));
  nodes.push_back(mknode<S>(4, 2, 1, frac<S>(1, 2), {S(1)}));
  nodes.push_back(mknode<S>(5, 2, 2, frac<S>(1, 2), {S(1)}));
  nodes.push_back(mknode<S>(6, 2, 2, frac<S>(1, 2), {frac<S>(1, 4)}));
  return ScenarioTree<S>({"S"}, std::move(nodes));
}

// One-step tree with explicit child prices, used to pin down increment sets.
template <class S = double>
inline ScenarioTree<S> one_step(std::vector<S> root_price,
                                std::vector<std::vector<S>> child_prices,
                                std::vector<S> probs = {}) {
  std::vector<TreeNode<S>> nodes;
  nodes.push_back(mknode<S>(0, 0, std::nullopt, S(1), std::move(root_price)));
  const auto b = child_prices.size();
  for (std::size_t c = 0; c < b; ++c) {
    const S p = probs.empty() ? S(1) / S(static_cast<int>(b)) : probs[c];
    nodes.push_back(mknode<S>(static_cast<NodeId>(c + 1), 1, 0, p, std::move(child_prices[c])));
  }
  return ScenarioTree<S>({"S"}, std::move(nodes));
}

template <class S = double>
inline RiskMeasureSpec<S> worst_case_spec() {
  RiskMeasureSpec<S> spec;
  spec.base.variant = RiskVariant::worst_case;
  return spec;
}

template <class S = double>
inline RiskMeasureSpec<S> cvar_spec(S alpha) {
  RiskMeasureSpec<S> spec;
  spec.base.variant = RiskVariant::cvar;
  spec.base.alpha = alpha;
  return spec;
}

inline std::vector<TreeNode<double>> copy_nodes(const ScenarioTree<double>& tree) {
  std::vector<TreeNode<double>> nodes;
  for (int t = 0; t <= tree.horizon(); ++t)
    for (NodeId id : tree.at_time(t)) nodes.push_back(tree.node(id));
  return nodes;
}

// ---------------------------------------------------------------------------
// Random arbitrage-free corpus.
//
// Child prices are built around a target kernel q* chosen in the relative
// interior of the node's determining set:  S_child[c] = Y[c] * S / <q*, Y>,
// with Y > 0 random, so that q* prices every asset exactly. q* is then a
// strictly positive martingale kernel inside the set, which rules out both
// one-step arbitrage notions at every node.
// ---------------------------------------------------------------------------

struct CorpusConfig {
  int depth = 2;
  int min_branch = 2;
  int max_branch = 3;
  int dim = 1;
  RiskVariant variant = RiskVariant::worst_case;
  double alpha = 0.7;  // cvar only
  int num_kernels = 3;  // kernels only
};

struct Instance {
  ScenarioTree<double> tree;
  RiskMeasureSpec<double> spec;
  NodeFunction<double> payoff;
};

inline std::vector<double> random_simplex_point(std::mt19937_64& rng, int n, double floor_w) {
  std::uniform_real_distribution<double> u(floor_w, 1.0);
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  return p;
}

inline Instance random_na_instance(std::mt19937_64& rng, const CorpusConfig& cfg) {
  std::uniform_int_distribution<int> branch(cfg.min_branch, cfg.max_branch);
  std::uniform_real_distribution<double> price0(0.5, 2.0);
  std::uniform_real_distribution<double> yv(0.5, 2.0);

  RiskMeasureSpec<double> spec;
  spec.base.variant = cfg.variant;
  spec.base.alpha = cfg.alpha;

  std::vector<TreeNode<double>> nodes;
  std::vector<double> root_price(static_cast<std::size_t>(cfg.dim));
  for (auto& v : root_price) v = price0(rng);
  nodes.push_back(mknode<double>(0, 0, std::nullopt, 1.0, root_price));

  NodeId next_id = 1;
  std::vector<NodeId> frontier{0};
  for (int t = 0; t < cfg.depth; ++t) {
    std::vector<NodeId> next_frontier;
    for (NodeId pid : frontier) {
      const std::vector<double>& sp = nodes[static_cast<std::size_t>(pid)].price;
      const int b = branch(rng);
      const std::vector<double> probs = random_simplex_point(rng, b, 0.1);

      // target kernel q* in the relative interior of the determining set
      std::vector<double> qstar;
      switch (cfg.variant) {
        case RiskVariant::cvar:
          qstar = probs;  // 0 < p_j < p_j / alpha for alpha < 1
          break;
        case RiskVariant::kernels: {
          std::vector<std::vector<double>> kernels;
          for (int k = 0; k < cfg.num_kernels; ++k)
            kernels.push_back(random_simplex_point(rng, b, 0.05));
          qstar.assign(static_cast<std::size_t>(b), 0.0);
          for (const auto& q : kernels)
            for (int j = 0; j < b; ++j) qstar[static_cast<std::size_t>(j)] += q[static_cast<std::size_t>(j)] / cfg.num_kernels;
          spec.base.per_node[pid] = std::move(kernels);
          break;
        }
        default:
          qstar = random_simplex_point(rng, b, 0.02);
          break;
      }

      std::vector<std::vector<double>> y(static_cast<std::size_t>(b),
                                         std::vector<double>(static_cast<std::size_t>(cfg.dim)));
      for (auto& row : y)
        for (auto& v : row) v = yv(rng);
      for (int c = 0; c < b; ++c) {
        std::vector<double> cp(static_cast<std::size_t>(cfg.dim));
        for (int i = 0; i < cfg.dim; ++i) {
          double denom = 0;
          for (int k = 0; k < b; ++k)
            denom += qstar[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
          cp[static_cast<std::size_t>(i)] =
              y[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] * sp[static_cast<std::size_t>(i)] / denom;
        }
        nodes.push_back(mknode<double>(next_id, t + 1, pid, probs[static_cast<std::size_t>(c)], std::move(cp)));
        next_frontier.push_back(next_id);
        ++next_id;
      }
    }
    frontier = std::move(next_frontier);
  }

  std::vector<std::string> assets;
  for (int i = 1; i <= cfg.dim; ++i) assets.push_back("S" + std::to_string(i));
  ScenarioTree<double> tree(std::move(assets), std::move(nodes));

  // strike-at-the-money call on the first asset
  NodeFunction<double> payoff;
  payoff.time = cfg.depth;
  const double strike = root_price[0];
  for (NodeId id : tree.at_time(cfg.depth))
    payoff.values[id] = std::max(tree.node(id).price[0] - strike, 0.0);
  return {std::move(tree), std::move(spec), std::move(payoff)};
}

// Shifts one coordinate of every child of one internal node far enough that
// all one-step increments there become strictly positive; no determining-set
// kernel can price that, so the instance acquires an arbitrage.
inline ScenarioTree<double> break_aip(const ScenarioTree<double>& tree, std::mt19937_64& rng) {
  std::vector<NodeId> internal;
  for (int t = 0; t < tree.horizon(); ++t)
    for (NodeId id : tree.at_time(t)) internal.push_back(id);
  const NodeId target = internal[rng() % internal.size()];
  const std::size_t coord = rng() % tree.node(target).price.size();

  double max_abs = 0;
  for (NodeId c : tree.node(target).children)
    max_abs = std::max(max_abs, std::abs(tree.delta_S(c)[coord]));
  const double shift = 2 * max_abs + 1;

  std::vector<TreeNode<double>> nodes = copy_nodes(tree);
  for (auto& n : nodes)
    if (n.parent && *n.parent == target) n.price[coord] += shift;
  return ScenarioTree<double>(tree.assets(), std::move(nodes));
}

// ---------------------------------------------------------------------------
// Brute-force oracles.
// ---------------------------------------------------------------------------

// Enumerates basic points of a small LP: every n-subset of tight rows drawn
// from equalities, inequalities and finite bounds. Sound for problems whose
// variables all carry finite box bounds (the feasible set is then a polytope,
// so optima sit at such points). Returns nullopt when nothing is feasible.
inline std::optional<double> lp_vertex_oracle(const riskhedge::LpProblem<double>& p,
                                              double feas_tol = 1e-7) {
  const int n = p.num_vars;
  auto lo_at = [&](int i) -> std::optional<double> {
    return static_cast<std::size_t>(i) < p.lower.size() ? p.lower[static_cast<std::size_t>(i)]
                                                        : std::nullopt;
  };
  auto up_at = [&](int i) -> std::optional<double> {
    return static_cast<std::size_t>(i) < p.upper.size() ? p.upper[static_cast<std::size_t>(i)]
                                                        : std::nullopt;
  };
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (std::size_t r = 0; r < p.eq_lhs.size(); ++r) {
    rows.push_back(p.eq_lhs[r]);
    rhs.push_back(p.eq_rhs[r]);
  }
  const std::size_t first_opt = rows.size();
  for (std::size_t r = 0; r < p.ineq_lhs.size(); ++r) {
    rows.push_back(p.ineq_lhs[r]);
    rhs.push_back(p.ineq_rhs[r]);
  }
  for (int i = 0; i < n; ++i) {
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    if (lo_at(i)) {
      rows.push_back(e);
      rhs.push_back(*lo_at(i));
    }
    if (up_at(i)) {
      rows.push_back(e);
      rhs.push_back(*up_at(i));
    }
  }

  auto feasible = [&](const std::vector<double>& x) {
    for (std::size_t r = 0; r < p.eq_lhs.size(); ++r)
      if (std::abs(riskhedge::detail::dot(p.eq_lhs[r], x) - p.eq_rhs[r]) > feas_tol) return false;
    for (std::size_t r = 0; r < p.ineq_lhs.size(); ++r)
      if (riskhedge::detail::dot(p.ineq_lhs[r], x) > p.ineq_rhs[r] + feas_tol) return false;
    for (int i = 0; i < n; ++i) {
      const double v = x[static_cast<std::size_t>(i)];
      if (lo_at(i) && v < *lo_at(i) - feas_tol) return false;
      if (up_at(i) && v > *up_at(i) + feas_tol) return false;
    }
    return true;
  };

  std::optional<double> best;
  const std::size_t m = rows.size();
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  // iterate over all n-subsets that contain every equality row
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t from, std::size_t k) {
    if (k == static_cast<std::size_t>(n)) {
      std::vector<std::vector<double>> a;
      std::vector<double> b;
      for (std::size_t i = 0; i < pick.size(); ++i) {
        a.push_back(rows[pick[i]]);
        b.push_back(rhs[pick[i]]);
      }
      std::vector<double> x;
      if (!riskhedge::detail::solve_square<double>(a, b, x, 1e-10)) return;
      if (!feasible(x)) return;
      const double val = riskhedge::detail::dot(p.objective, x);
      if (!best || val < *best) best = val;
      return;
    }
    for (std::size_t i = from; i < m; ++i) {
      if (k < p.eq_lhs.size() && i >= first_opt) return;  // equalities are mandatory
      pick[k] = i;
      rec(i + 1, k + 1);
    }
  };
  if (static_cast<std::size_t>(n) <= m) rec(0, 0);
  return best;
}

// Vertices of {0 <= q <= p/alpha, sum q = 1} by subset enumeration: a vertex
// has every coordinate at a bound except at most one.
inline std::vector<std::vector<double>> cvar_vertex_oracle(const std::vector<double>& p,
                                                           double alpha, double tol = 1e-12) {
  const std::size_t n = p.size();
  std::vector<double> cap(n);
  for (std::size_t j = 0; j < n; ++j) cap[j] = p[j] / alpha;
  std::vector<std::vector<double>> out;
  auto push_unique = [&](const std::vector<double>& q) {
    for (const auto& r : out) {
      double d = 0;
      for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::abs(r[j] - q[j]));
      if (d <= 1e-9) return;
    }
    out.push_back(q);
  };
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask & (std::size_t{1} << j)) s += cap[j];
    if (std::abs(s - 1.0) <= tol) {
      std::vector<double> q(n, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (mask & (std::size_t{1} << j)) q[j] = cap[j];
      push_unique(q);
      continue;
    }
    if (s >= 1.0) continue;
    for (std::size_t f = 0; f < n; ++f) {
      if (mask & (std::size_t{1} << f)) continue;
      const double rem = 1.0 - s;
      if (rem <= tol || rem >= cap[f] - tol) continue;
      std::vector<double> q(n, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (mask & (std::size_t{1} << j)) q[j] = cap[j];
      q[f] = rem;
      push_unique(q);
    }
  }
  return out;
}

// Rockafellar-Uryasev form of CVaR of the loss -x; the minimum over z sits at
// one of the kinks z = -x_j.
inline double cvar_rho_oracle(const std::vector<double>& p, double alpha,
                              const std::vector<double>& x) {
  double best = 0;
  bool first = true;
  for (double xj : x) {
    const double z = -xj;
    double e = 0;
    for (std::size_t j = 0; j < x.size(); ++j) e += p[j] * std::max(-x[j] - z, 0.0);
    const double v = z + e / alpha;
    if (first || v < best) {
      best = v;
      first = false;
    }
  }
  return best;
}

// Minimum of a max of affine 1-d pieces: scan kinks, detect unboundedness
// from the slope range. Returns nullopt when the envelope drops to -infinity.
inline std::optional<double> g_min_oracle_1d(const riskhedge::GFunction<double>& g) {
  double lo = 0, hi = 0, max_int = 0;
  bool first = true;
  for (const auto& pc : g.pieces) {
    const double s = pc.slope[0];
    if (first) {
      lo = hi = s;
      max_int = pc.intercept;
      first = false;
    } else {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      max_int = std::max(max_int, pc.intercept);
    }
  }
  if (lo > 1e-12 || hi < -1e-12) return std::nullopt;
  double best = max_int;  // value at a flat minimizer or at x = 0 fallback
  auto eval = [&](double x) { return g.eval({x}); };
  best = eval(0.0);
  for (std::size_t a = 0; a < g.pieces.size(); ++a)
    for (std::size_t b = a + 1; b < g.pieces.size(); ++b) {
      const double ds = g.pieces[a].slope[0] - g.pieces[b].slope[0];
      if (std::abs(ds) < 1e-12) continue;
      const double x = (g.pieces[b].intercept - g.pieces[a].intercept) / ds;
      best = std::min(best, eval(x));
    }
  return best;
}

// Strictly positive martingale kernel existence for one asset: increments
// all zero, or at least one on each side of zero.
inline bool classical_na_oracle_1d(const std::vector<double>& deltas, double tol = 1e-9) {
  bool pos = false, neg = false, all_zero = true;
  for (double d : deltas) {
    if (d > tol) pos = true;
    if (d < -tol) neg = true;
    if (std::abs(d) > tol) all_zero = false;
  }
  return all_zero || (pos && neg);
}

inline double to_d(double v) { return v; }

template <class S>
inline double max_gap(const NodeFunction<S>& a, const NodeFunction<S>& b) {
  double m = 0;
  for (const auto& [id, v] : a.values) {
    if (a.is_minus_inf(id) != b.is_minus_inf(id)) return std::numeric_limits<double>::infinity();
    if (a.is_minus_inf(id)) continue;
    m = std::max(m, std::abs(riskhedge::scalar_traits<S>::to_double(v) -
                             riskhedge::scalar_traits<S>::to_double(b.at(id))));
  }
  return m;
}

}  // namespace helpers
