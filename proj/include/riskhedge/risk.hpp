#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lp.hpp"
#include "tree.hpp"

namespace riskhedge {

enum class RiskVariant { worst_case, cvar, kernels, cone };

inline const char* to_string(RiskVariant v) {
  switch (v) {
    case RiskVariant::worst_case: return "worst_case";
    case RiskVariant::cvar: return "cvar";
    case RiskVariant::kernels: return "kernels";
    case RiskVariant::cone: return "cone";
  }
  return "unknown";
}

/// One risk-measure description. For `kernels` the per-node vectors are
/// probability weights over a node's children; for `cone` they generate the
/// acceptance cone in child coordinates.
template <class S>
struct RiskFragment {
  RiskVariant variant = RiskVariant::worst_case;
  S alpha{};  // cvar only
  std::map<NodeId, std::vector<std::vector<S>>> per_node;
};

/// Global fragment plus optional per-node overrides.
template <class S>
struct RiskMeasureSpec {
  RiskFragment<S> base;
  std::map<NodeId, RiskFragment<S>> overrides;

  const RiskFragment<S>& fragment_for(NodeId id) const {
    auto it = overrides.find(id);
    return it == overrides.end() ? base : it->second;
  }
};

/// Conditional determining set of one node, stored through its vertices; each
/// vertex is a probability vector over the node's children (child order =
/// sorted child ids).
template <class S>
struct OneStepRiskMeasure {
  NodeId node = 0;
  RiskVariant variant = RiskVariant::worst_case;
  std::vector<std::vector<S>> vertices;
  bool supports_all_children = true;  // every child weighted by some vertex
};

template <class S>
struct DynamicRiskMeasure {
  std::map<NodeId, OneStepRiskMeasure<S>> one_step;

  const OneStepRiskMeasure<S>& at(NodeId id) const {
    auto it = one_step.find(id);
    if (it == one_step.end())
      fail(ErrorCode::not_a_parent, "no one-step measure at node " + std::to_string(id));
    return it->second;
  }
};

namespace detail {

template <class S>
inline bool vectors_close(const std::vector<S>& a, const std::vector<S>& b, const S& tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (abs_of(S(a[i] - b[i])) > tol) return false;
  return true;
}

template <class S>
inline void dedupe_vectors(std::vector<std::vector<S>>& vs, const S& tol) {
  std::sort(vs.begin(), vs.end());
  std::vector<std::vector<S>> out;
  for (auto& v : vs) {
    bool dup = false;
    for (const auto& w : out)
      if (vectors_close(v, w, tol)) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(std::move(v));
  }
  vs = std::move(out);
}

}  // namespace detail

/// Vertices of { q in R^m : q >= 0, sum q = 1, rows . q >= 0 } by exhaustive
/// enumeration of active-constraint bases.
template <class S>
inline std::vector<std::vector<S>> enumerate_polytope_vertices(
    int m, const std::vector<std::vector<S>>& rows, S tol = scalar_traits<S>::default_tol()) {
  if (m <= 0) fail(ErrorCode::malformed_problem, "empty child set");
  std::vector<std::vector<S>> cons;  // c . q >= 0
  for (int j = 0; j < m; ++j) {
    std::vector<S> e(m, S(0));
    e[j] = S(1);
    cons.push_back(std::move(e));
  }
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != m)
      fail(ErrorCode::malformed_problem, "constraint row of wrong length");
    cons.push_back(r);
  }

  std::vector<std::vector<S>> verts;
  const int k = static_cast<int>(cons.size());
  const int need = m - 1;
  double combos = 1;
  for (int i = 0; i < need; ++i) combos *= double(k - i) / double(i + 1);
  if (combos > 5e6)
    fail(ErrorCode::combinatorial_limit, "vertex enumeration basis count too large");
  std::vector<int> pick(need);
  S ptol = scalar_traits<S>::exact ? S(0) : S(1e-11);

  auto feasible = [&](const std::vector<S>& q) {
    for (const auto& c : cons) {
      S acc(0);
      for (int i = 0; i < m; ++i) acc += c[i] * q[i];
      if (acc < -tol) return false;
    }
    return true;
  };

  if (need == 0) {
    std::vector<S> q{S(1)};
    if (feasible(q)) verts.push_back(q);
    return verts;
  }

  // iterate over all (m-1)-subsets of the constraint list
  for (int i = 0; i < need; ++i) pick[i] = i;
  for (;;) {
    std::vector<std::vector<S>> a(static_cast<std::size_t>(m), std::vector<S>(m));
    std::vector<S> rhs(static_cast<std::size_t>(m), S(0));
    for (int r = 0; r < need; ++r) a[r] = cons[pick[r]];
    a[need].assign(m, S(1));
    rhs[need] = S(1);
    std::vector<S> q;
    if (detail::solve_square<S>(a, rhs, q, ptol) && feasible(q)) verts.push_back(q);

    int i = need - 1;
    while (i >= 0 && pick[i] == k - need + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int r = i + 1; r < need; ++r) pick[r] = pick[r - 1] + 1;
  }
  detail::dedupe_vectors(verts, max_of(tol, S(0)));
  return verts;
}

/// Vertices of the conditional CVaR determining set
/// { q : 0 <= q_j <= p_j / alpha, sum q = 1 }: at a vertex all coordinates but
/// at most one sit at a box bound.
template <class S>
inline std::vector<std::vector<S>> cvar_vertices(const std::vector<S>& p, const S& alpha,
                                                 S tol = scalar_traits<S>::default_tol()) {
  const int m = static_cast<int>(p.size());
  std::vector<S> cap(p);
  for (S& u : cap) u /= alpha;
  std::vector<std::vector<S>> verts;
  for (int f = 0; f < m; ++f) {
    std::vector<int> others;
    for (int j = 0; j < m; ++j)
      if (j != f) others.push_back(j);
    const std::size_t masks = std::size_t{1} << others.size();
    for (std::size_t mask = 0; mask < masks; ++mask) {
      std::vector<S> q(static_cast<std::size_t>(m), S(0));
      S used(0);
      for (std::size_t i = 0; i < others.size(); ++i) {
        if (mask >> i & 1U) {
          q[static_cast<std::size_t>(others[i])] = cap[static_cast<std::size_t>(others[i])];
          used += cap[static_cast<std::size_t>(others[i])];
        }
      }
      S rest = S(1) - used;
      if (rest < -tol || rest > cap[static_cast<std::size_t>(f)] + tol) continue;
      if (rest < S(0)) rest = S(0);
      if (rest > cap[static_cast<std::size_t>(f)]) rest = cap[static_cast<std::size_t>(f)];
      q[static_cast<std::size_t>(f)] = rest;
      verts.push_back(std::move(q));
    }
  }
  detail::dedupe_vectors(verts, max_of(tol, S(0)));
  return verts;
}

/// Checks that an acceptance cone spanned by `generators` contains the
/// nonnegative orthant and meets the nonpositive orthant only at the origin.
template <class S>
inline void validate_acceptance_cone(const std::vector<std::vector<S>>& generators, int m,
                                     S tol = scalar_traits<S>::default_tol()) {
  if (generators.empty()) fail(ErrorCode::invalid_spec, "acceptance cone needs generators");
  for (const auto& g : generators)
    if (static_cast<int>(g.size()) != m)
      fail(ErrorCode::invalid_spec, "cone generator of wrong length");
  const int k = static_cast<int>(generators.size());

  // e_j in cone(generators): feasibility of sum_i lambda_i g_i = e_j, lambda >= 0
  for (int j = 0; j < m; ++j) {
    LpProblem<S> lp;
    lp.num_vars = k;
    lp.objective.assign(k, S(0));
    lp.eq_lhs.assign(static_cast<std::size_t>(m), std::vector<S>(k));
    lp.eq_rhs.assign(static_cast<std::size_t>(m), S(0));
    for (int r = 0; r < m; ++r)
      for (int i = 0; i < k; ++i) lp.eq_lhs[r][i] = generators[i][r];
    lp.eq_rhs[j] = S(1);
    lp.lower.assign(k, S(0));
    lp.upper.assign(k, std::nullopt);
    if (riskhedge::solve(lp, LpOptions<S>{tol}).status != LpStatus::optimal)
      fail(ErrorCode::invalid_spec,
           "acceptance cone misses the nonnegative orthant direction " + std::to_string(j));
  }

  // no nonzero y <= 0 in the cone: sum_i lambda_i g_i <= 0 with total mass -1
  {
    LpProblem<S> lp;
    lp.num_vars = k;
    lp.objective.assign(k, S(0));
    lp.ineq_lhs.assign(static_cast<std::size_t>(m), std::vector<S>(k));
    lp.ineq_rhs.assign(static_cast<std::size_t>(m), S(0));
    for (int r = 0; r < m; ++r)
      for (int i = 0; i < k; ++i) lp.ineq_lhs[r][i] = generators[i][r];
    std::vector<S> total(k, S(0));
    for (int i = 0; i < k; ++i)
      for (int r = 0; r < m; ++r) total[i] += generators[i][r];
    lp.eq_lhs.push_back(total);
    lp.eq_rhs.push_back(S(-1));
    lp.lower.assign(k, S(0));
    lp.upper.assign(k, std::nullopt);
    if (riskhedge::solve(lp, LpOptions<S>{tol}).status == LpStatus::optimal)
      fail(ErrorCode::invalid_spec,
           "acceptance cone contains a nonzero nonpositive position");
  }
}

namespace detail {

/// Drops kernels lying in the convex hull of the others.
template <class S>
inline void reduce_to_hull_vertices(std::vector<std::vector<S>>& pts, const S& tol) {
  dedupe_vectors(pts, max_of(tol, S(0)));
  const int m = pts.empty() ? 0 : static_cast<int>(pts[0].size());
  for (std::size_t i = 0; i < pts.size();) {
    if (pts.size() == 1) break;
    LpProblem<S> lp;
    const int k = static_cast<int>(pts.size()) - 1;
    lp.num_vars = k;
    lp.objective.assign(k, S(0));
    lp.eq_lhs.assign(static_cast<std::size_t>(m) + 1, std::vector<S>(k));
    lp.eq_rhs.assign(static_cast<std::size_t>(m) + 1, S(0));
    int col = 0;
    for (std::size_t o = 0; o < pts.size(); ++o) {
      if (o == i) continue;
      for (int r = 0; r < m; ++r) lp.eq_lhs[r][col] = pts[o][r];
      lp.eq_lhs[m][col] = S(1);
      ++col;
    }
    for (int r = 0; r < m; ++r) lp.eq_rhs[r] = pts[i][r];
    lp.eq_rhs[m] = S(1);
    lp.lower.assign(k, S(0));
    lp.upper.assign(k, std::nullopt);
    if (riskhedge::solve(lp, LpOptions<S>{tol}).status == LpStatus::optimal)
      pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
    else
      ++i;
  }
}

}  // namespace detail

/// Builds the determining-set vertices of one node. The child count is capped
/// at 16 for the variants that enumerate polytope vertices.
template <class S>
inline OneStepRiskMeasure<S> build_one_step(const ScenarioTree<S>& tree,
                                            const RiskMeasureSpec<S>& spec, NodeId id,
                                            S tol = scalar_traits<S>::default_tol()) {
  const TreeNode<S>& n = tree.node(id);
  if (n.children.empty())
    fail(ErrorCode::not_a_parent, "node " + std::to_string(id) + " has no children");
  const int m = static_cast<int>(n.children.size());
  const RiskFragment<S>& frag = spec.fragment_for(id);

  OneStepRiskMeasure<S> out;
  out.node = id;
  out.variant = frag.variant;

  switch (frag.variant) {
    case RiskVariant::worst_case: {
      for (int j = 0; j < m; ++j) {
        std::vector<S> e(static_cast<std::size_t>(m), S(0));
        e[static_cast<std::size_t>(j)] = S(1);
        out.vertices.push_back(std::move(e));
      }
      break;
    }
    case RiskVariant::cvar: {
      if (!(frag.alpha > S(0)) || frag.alpha > S(1))
        fail(ErrorCode::invalid_spec, "cvar level must lie in (0, 1]");
      if (m > 16)
        fail(ErrorCode::invalid_spec, "cvar vertex enumeration capped at 16 children");
      std::vector<S> p;
      for (NodeId c : n.children) p.push_back(tree.node(c).prob);
      out.vertices = cvar_vertices(p, frag.alpha, tol);
      break;
    }
    case RiskVariant::kernels: {
      auto it = frag.per_node.find(id);
      if (it == frag.per_node.end() || it->second.empty())
        fail(ErrorCode::invalid_spec, "no kernels given for node " + std::to_string(id));
      std::vector<std::vector<S>> pts = it->second;
      const S sum_tol = scalar_traits<S>::from_double(1e-12);
      for (const auto& q : pts) {
        if (static_cast<int>(q.size()) != m)
          fail(ErrorCode::invalid_spec, "kernel of wrong length at node " + std::to_string(id));
        S s(0);
        for (const S& v : q) {
          if (v < -tol)
            fail(ErrorCode::invalid_spec, "negative kernel weight at node " + std::to_string(id));
          s += v;
        }
        if (abs_of(S(s - S(1))) > max_of(sum_tol, tol))
          fail(ErrorCode::invalid_spec, "kernel weights must sum to 1 at node " + std::to_string(id));
      }
      detail::reduce_to_hull_vertices(pts, tol);
      out.vertices = std::move(pts);
      break;
    }
    case RiskVariant::cone: {
      auto it = frag.per_node.find(id);
      if (it == frag.per_node.end() || it->second.empty())
        fail(ErrorCode::invalid_spec, "no cone generators for node " + std::to_string(id));
      if (m > 16)
        fail(ErrorCode::invalid_spec, "cone vertex enumeration capped at 16 children");
      validate_acceptance_cone(it->second, m, tol);
      out.vertices = enumerate_polytope_vertices(m, it->second, tol);
      if (out.vertices.empty())
        fail(ErrorCode::cone_empty_dual,
             "acceptance cone at node " + std::to_string(id) + " has an empty dual set");
      break;
    }
  }

  for (int j = 0; j < m; ++j) {
    bool seen = false;
    for (const auto& q : out.vertices) seen = seen || q[static_cast<std::size_t>(j)] > tol;
    if (!seen) out.supports_all_children = false;
  }
  return out;
}

template <class S>
inline DynamicRiskMeasure<S> build_dynamic(const ScenarioTree<S>& tree,
                                           const RiskMeasureSpec<S>& spec,
                                           S tol = scalar_traits<S>::default_tol()) {
  DynamicRiskMeasure<S> drm;
  for (int t = 0; t < tree.horizon(); ++t)
    for (NodeId id : tree.at_time(t)) drm.one_step.emplace(id, build_one_step(tree, spec, id, tol));
  return drm;
}

/// One-step risk of a position given by one value per child (child order):
/// rho(x) = max over vertices q of q . (-x).
template <class S>
inline S rho_vertex_max(const OneStepRiskMeasure<S>& m, const std::vector<S>& x) {
  bool first = true;
  S best(0);
  for (const auto& q : m.vertices) {
    S acc(0);
    for (std::size_t j = 0; j < x.size(); ++j) acc -= q[j] * x[j];
    if (first || best < acc) {
      best = acc;
      first = false;
    }
  }
  return best;
}

template <class S>
inline std::vector<S> child_values(const ScenarioTree<S>& tree, NodeId id,
                                   const std::map<NodeId, S>& values) {
  const TreeNode<S>& n = tree.node(id);
  std::vector<S> x;
  x.reserve(n.children.size());
  for (NodeId c : n.children) {
    auto it = values.find(c);
    if (it == values.end())
      fail(ErrorCode::validation_error, "missing child value for node " + std::to_string(c));
    x.push_back(it->second);
  }
  return x;
}

/// rho_t(X) for an F_u-measurable X, computed by backward composition of the
/// one-step measures; at s = u the value is -X.
template <class S>
inline NodeFunction<S> rho_dynamic(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                                   const NodeFunction<S>& x, int t) {
  check_node_function(tree, x);
  if (t > x.time) fail(ErrorCode::validation_error, "evaluation time after position time");
  NodeFunction<S> cur = negate(x);
  cur.time = x.time;
  for (int s = x.time - 1; s >= t; --s) {
    NodeFunction<S> next;
    next.time = s;
    for (NodeId id : tree.at_time(s)) {
      // rho_s(X) = rho_one(-rho_{s+1}(X)): with cur = rho_{s+1}(X) this is
      // max over vertices of the q-average of the child values of cur.
      std::vector<S> vals = child_values(tree, id, cur.values);
      for (S& v : vals) v = -v;
      next.values[id] = rho_vertex_max(drm.at(id), vals);
    }
    cur = std::move(next);
  }
  return cur;
}

template <class S>
struct AcceptabilityReport {
  NodeFunction<S> rho;          // rho_t(X)
  std::map<NodeId, bool> acceptable;  // rho_t(X) <= tol per node
  bool all = true;
};

template <class S>
inline AcceptabilityReport<S> acceptability(const ScenarioTree<S>& tree,
                                            const DynamicRiskMeasure<S>& drm,
                                            const NodeFunction<S>& x, int t,
                                            S tol = scalar_traits<S>::default_tol()) {
  AcceptabilityReport<S> rep;
  rep.rho = rho_dynamic(tree, drm, x, t);
  for (const auto& [id, v] : rep.rho.values) {
    const bool ok = !(v > tol);
    rep.acceptable[id] = ok;
    rep.all = rep.all && ok;
  }
  return rep;
}

/// X lies in the zero-risk face A0 at a node when both X and -X are
/// acceptable there; both risks then vanish.
template <class S>
struct A0Report {
  std::map<NodeId, bool> in_A0;
  NodeFunction<S> rho_plus, rho_minus;
};

template <class S>
inline A0Report<S> is_A0(const ScenarioTree<S>& tree, const DynamicRiskMeasure<S>& drm,
                         const NodeFunction<S>& x, int t,
                         S tol = scalar_traits<S>::default_tol()) {
  A0Report<S> rep;
  rep.rho_plus = rho_dynamic(tree, drm, x, t);
  rep.rho_minus = rho_dynamic(tree, drm, negate(x), t);
  for (const auto& [id, vp] : rep.rho_plus.values) {
    const S vm = rep.rho_minus.at(id);
    const bool in0 = !(vp > tol) && !(vm > tol);
    if (in0 && (abs_of(vp) > tol || abs_of(vm) > tol))
      fail(ErrorCode::disagreement, "two-sided acceptable position with nonzero risk");
    rep.in_A0[id] = in0;
  }
  return rep;
}

struct CoherenceViolation {
  std::string axiom;
  NodeId node = 0;
  int t = 0;
  double amount = 0;
};

template <class S>
struct CoherenceReport {
  bool pass = true;
  double max_violation = 0;
  long samples = 0;
  std::vector<CoherenceViolation> violations;
};

namespace detail {

template <class S>
inline void note_violation(CoherenceReport<S>& rep, const char* axiom, NodeId id, int t,
                           const S& amount, const S& tol) {
  if (!(amount > tol)) return;
  rep.pass = false;
  const double a = scalar_traits<S>::to_double(amount);
  rep.max_violation = std::max(rep.max_violation, a);
  if (rep.violations.size() < 32) rep.violations.push_back({axiom, id, t, a});
}

}  // namespace detail

/// Samples random positions and checks the coherence axioms of the composed
/// measure at every node: normalization, monotonicity, cash invariance,
/// subadditivity, positive homogeneity and the Lipschitz bound that stands in
/// for lower semicontinuity on a finite space.
template <class S>
inline CoherenceReport<S> check_coherence_axioms(const ScenarioTree<S>& tree,
                                                 const DynamicRiskMeasure<S>& drm, long samples,
                                                 unsigned seed,
                                                 S tol = scalar_traits<S>::default_tol()) {
  CoherenceReport<S> rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(0.0, 3.0);
  const int T = tree.horizon();
  if (T == 0) return rep;

  auto random_fn = [&](int u) {
    NodeFunction<S> f;
    f.time = u;
    for (NodeId id : tree.at_time(u)) f.values[id] = scalar_traits<S>::from_double(val(rng));
    return f;
  };

  for (long s = 0; s < samples; ++s) {
    const int u = 1 + static_cast<int>(rng() % static_cast<unsigned long>(T));
    const int t = static_cast<int>(rng() % static_cast<unsigned long>(u));
    NodeFunction<S> x = random_fn(u);
    NodeFunction<S> xp = random_fn(u);
    NodeFunction<S> m = random_fn(t);
    const S k = scalar_traits<S>::from_double(scale(rng));
    ++rep.samples;

    NodeFunction<S> rx = rho_dynamic(tree, drm, x, t);

    {  // normalization: rho_t(0) = 0
      NodeFunction<S> zero;
      zero.time = u;
      for (NodeId id : tree.at_time(u)) zero.values[id] = S(0);
      NodeFunction<S> rz = rho_dynamic(tree, drm, zero, t);
      for (const auto& [id, v] : rz.values)
        detail::note_violation(rep, "normalization", id, t, abs_of(v), tol);
    }

    {  // monotonicity: X <= X' pointwise implies rho(X) >= rho(X')
      NodeFunction<S> hi = x;
      for (auto& [id, v] : hi.values) v += abs_of(xp.at(id));
      NodeFunction<S> rhi = rho_dynamic(tree, drm, hi, t);
      for (const auto& [id, v] : rhi.values)
        detail::note_violation(rep, "monotonicity", id, t, S(v - rx.at(id)), tol);
    }

    {  // cash invariance: rho(X + m_t) = rho(X) - m_t for F_t-measurable m
      NodeFunction<S> shifted = x;
      NodeFunction<S> ml = lift(tree, m, u);
      for (auto& [id, v] : shifted.values) v += ml.at(id);
      NodeFunction<S> rs = rho_dynamic(tree, drm, shifted, t);
      for (const auto& [id, v] : rs.values)
        detail::note_violation(rep, "cash_invariance", id, t,
                               abs_of(S(v - (rx.at(id) - m.at(id)))), tol);
    }

    {  // subadditivity: rho(X + X') <= rho(X) + rho(X')
      NodeFunction<S> sum = x;
      for (auto& [id, v] : sum.values) v += xp.at(id);
      NodeFunction<S> rsum = rho_dynamic(tree, drm, sum, t);
      NodeFunction<S> rxp = rho_dynamic(tree, drm, xp, t);
      for (const auto& [id, v] : rsum.values)
        detail::note_violation(rep, "subadditivity", id, t, S(v - (rx.at(id) + rxp.at(id))), tol);
    }

    {  // positive homogeneity: rho(kX) = k rho(X) for k >= 0
      NodeFunction<S> kx = x;
      for (auto& [id, v] : kx.values) v *= k;
      NodeFunction<S> rkx = rho_dynamic(tree, drm, kx, t);
      for (const auto& [id, v] : rkx.values)
        detail::note_violation(rep, "positive_homogeneity", id, t, abs_of(S(v - k * rx.at(id))),
                               max_of(tol, S(tol * k)));
    }

    {  // Lipschitz continuity: |rho(X+h) - rho(X)| <= max |h|
      NodeFunction<S> pert = x;
      S hmax(0);
      for (auto& [id, v] : pert.values) {
        const S h = scalar_traits<S>::from_double(val(rng) * 1e-8);
        v += h;
        hmax = max_of(hmax, abs_of(h));
      }
      NodeFunction<S> rp = rho_dynamic(tree, drm, pert, t);
      for (const auto& [id, v] : rp.values)
        detail::note_violation(rep, "continuity", id, t, S(abs_of(S(v - rx.at(id))) - hmax), tol);
    }
  }
  return rep;
}

template <class S>
struct TimeConsistencyReport {
  bool pass = true;
  double max_gap = 0;
};

/// Definitional recursion check: rho_t(-rho_{t+1}(X)) = rho_t(X) for every
/// t below the position time.
template <class S>
inline TimeConsistencyReport<S> check_time_consistency(const ScenarioTree<S>& tree,
                                                       const DynamicRiskMeasure<S>& drm,
                                                       const NodeFunction<S>& x,
                                                       S tol = scalar_traits<S>::default_tol()) {
  TimeConsistencyReport<S> rep;
  for (int t = 0; t < x.time; ++t) {
    NodeFunction<S> direct = rho_dynamic(tree, drm, x, t);
    NodeFunction<S> inner = rho_dynamic(tree, drm, x, t + 1);
    NodeFunction<S> composed = rho_dynamic(tree, drm, negate(inner), t);
    for (const auto& [id, v] : direct.values) {
      const S gap = abs_of(S(v - composed.at(id)));
      rep.max_gap = std::max(rep.max_gap, scalar_traits<S>::to_double(gap));
      if (gap > tol) rep.pass = false;
    }
  }
  return rep;
}

/// Measures of the composed determining set at a node: every product of
/// one-step vertices along the subtree, reported as weights on the subtree
/// leaves. Count capped to keep the enumeration honest about blow-up.
template <class S>
inline std::vector<std::map<NodeId, S>> extract_dual_set(const ScenarioTree<S>& tree,
                                                         const DynamicRiskMeasure<S>& drm,
                                                         NodeId id,
                                                         std::size_t cap = 1000000) {
  const TreeNode<S>& n = tree.node(id);
  if (n.time == tree.horizon()) return {std::map<NodeId, S>{{id, S(1)}}};

  const OneStepRiskMeasure<S>& osm = drm.at(id);
  std::vector<std::vector<std::map<NodeId, S>>> per_child;
  std::size_t count = osm.vertices.size();
  for (NodeId c : n.children) {
    per_child.push_back(extract_dual_set(tree, drm, c, cap));
    count *= per_child.back().size();
    if (count > cap)
      fail(ErrorCode::combinatorial_limit,
           "dual set of node " + std::to_string(id) + " exceeds the enumeration cap");
  }

  std::vector<std::map<NodeId, S>> out;
  std::vector<std::size_t> choice(per_child.size(), 0);
  for (const auto& q : osm.vertices) {
    std::fill(choice.begin(), choice.end(), 0);
    for (;;) {
      std::map<NodeId, S> measure;
      for (std::size_t j = 0; j < per_child.size(); ++j) {
        for (const auto& [leaf, w] : per_child[j][choice[j]]) measure[leaf] = q[j] * w;
      }
      out.push_back(std::move(measure));
      std::size_t j = 0;
      while (j < choice.size()) {
        if (++choice[j] < per_child[j].size()) break;
        choice[j] = 0;
        ++j;
      }
      if (j == choice.size()) break;
    }
  }
  return out;
}

}  // namespace riskhedge
