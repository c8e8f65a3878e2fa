#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "scalar.hpp"

namespace riskhedge {

using NodeId = std::int64_t;

template <class S>
struct TreeNode {
  NodeId id = 0;
  int time = 0;
  std::optional<NodeId> parent;
  S prob{};  // conditional probability given the parent; 1 at the root
  std::vector<S> price;
  std::vector<NodeId> children;  // sorted by id
};

/// Event tree with uniform depth. Nodes at time t are the atoms of F_t; the
/// conditional probabilities of a sibling set are strictly positive and sum
/// to one within prob_tol.
template <class S>
class ScenarioTree {
 public:
  static constexpr double prob_sum_tol = 1e-12;

  ScenarioTree(std::vector<std::string> assets, std::vector<TreeNode<S>> nodes)
      : assets_(std::move(assets)), nodes_(std::move(nodes)) {
    validate_and_index();
  }

  int horizon() const { return horizon_; }
  int dim() const { return static_cast<int>(assets_.size()); }
  const std::vector<std::string>& assets() const { return assets_; }
  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return root_; }

  bool contains(NodeId id) const { return index_.count(id) > 0; }

  const TreeNode<S>& node(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      fail(ErrorCode::validation_error, "unknown node id " + std::to_string(id));
    return nodes_[it->second];
  }

  const std::vector<NodeId>& at_time(int t) const {
    if (t < 0 || t > horizon_)
      fail(ErrorCode::validation_error, "time " + std::to_string(t) + " outside horizon");
    return slices_[static_cast<std::size_t>(t)];
  }

  bool is_leaf(NodeId id) const { return node(id).time == horizon_; }

  /// Price increment child.price - parent.price of the step into `child_id`.
  std::vector<S> delta_S(NodeId child_id) const {
    const TreeNode<S>& c = node(child_id);
    if (!c.parent) fail(ErrorCode::validation_error, "root node has no price increment");
    const TreeNode<S>& p = node(*c.parent);
    std::vector<S> d(c.price);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= p.price[i];
    return d;
  }

  S unconditional_probability(NodeId id) const {
    S acc(1);
    const TreeNode<S>* cur = &node(id);
    while (cur->parent) {
      acc *= cur->prob;
      cur = &node(*cur->parent);
    }
    return acc;
  }

  std::vector<NodeId> subtree(NodeId id) const {
    std::vector<NodeId> out{id};
    for (std::size_t k = 0; k < out.size(); ++k) {
      const TreeNode<S>& n = node(out[k]);
      out.insert(out.end(), n.children.begin(), n.children.end());
    }
    return out;
  }

  std::vector<NodeId> subtree_at_time(NodeId id, int t) const {
    std::vector<NodeId> out;
    for (NodeId k : subtree(id))
      if (node(k).time == t) out.push_back(k);
    return out;
  }

 private:
  std::vector<std::string> assets_;
  std::vector<TreeNode<S>> nodes_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<NodeId>> slices_;
  NodeId root_ = 0;
  int horizon_ = 0;

  void validate_and_index() {
    std::vector<std::string> bad;
    if (assets_.empty()) bad.push_back("asset list is empty");
    if (nodes_.empty()) bad.push_back("node list is empty");
    const std::size_t d = assets_.size();

    std::sort(nodes_.begin(), nodes_.end(), [](const TreeNode<S>& a, const TreeNode<S>& b) {
      return a.time != b.time ? a.time < b.time : a.id < b.id;
    });
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      if (!index_.emplace(nodes_[k].id, k).second)
        bad.push_back("duplicate node id " + std::to_string(nodes_[k].id));
    }
    if (!bad.empty()) fail(ErrorCode::validation_error, "invalid scenario tree", bad);

    int roots = 0;
    horizon_ = 0;
    for (TreeNode<S>& n : nodes_) {
      n.children.clear();
      horizon_ = std::max(horizon_, n.time);
      if (!n.parent) {
        ++roots;
        root_ = n.id;
        if (n.time != 0) bad.push_back("root node " + std::to_string(n.id) + " not at time 0");
        if (abs_of(S(n.prob - S(1))) > S(scalar_traits<S>::from_double(prob_sum_tol)))
          bad.push_back("root node " + std::to_string(n.id) + " must have probability 1");
      }
      if (n.price.size() != d)
        bad.push_back("node " + std::to_string(n.id) + " price vector length mismatch");
      for (const S& v : n.price)
        if (!scalar_traits<S>::finite(v))
          bad.push_back("node " + std::to_string(n.id) + " has a non-finite price");
      if (!scalar_traits<S>::finite(n.prob) || !(n.prob > S(0)))
        bad.push_back("node " + std::to_string(n.id) + " conditional probability not positive");
    }
    if (roots != 1) bad.push_back("tree must have exactly one root, found " + std::to_string(roots));
    if (!bad.empty()) fail(ErrorCode::validation_error, "invalid scenario tree", bad);

    for (TreeNode<S>& n : nodes_) {
      if (!n.parent) continue;
      auto it = index_.find(*n.parent);
      if (it == index_.end()) {
        bad.push_back("node " + std::to_string(n.id) + " references missing parent " +
                      std::to_string(*n.parent));
        continue;
      }
      TreeNode<S>& p = nodes_[it->second];
      if (p.time + 1 != n.time)
        bad.push_back("node " + std::to_string(n.id) + " is not one step after its parent");
      else
        p.children.push_back(n.id);
    }
    if (!bad.empty()) fail(ErrorCode::validation_error, "invalid scenario tree", bad);

    const S sum_tol = scalar_traits<S>::from_double(prob_sum_tol);
    for (const TreeNode<S>& n : nodes_) {
      if (n.time == horizon_) {
        if (!n.children.empty())
          bad.push_back("node " + std::to_string(n.id) + " at the horizon has children");
        continue;
      }
      if (n.children.empty()) {
        bad.push_back("node " + std::to_string(n.id) + " at time " + std::to_string(n.time) +
                      " has no children (depth must be uniform)");
        continue;
      }
      S s(0);
      for (NodeId c : n.children) s += node(c).prob;
      if (abs_of(S(s - S(1))) > sum_tol)
        bad.push_back("children of node " + std::to_string(n.id) +
                      " have conditional probabilities not summing to 1");
    }
    if (!bad.empty()) fail(ErrorCode::validation_error, "invalid scenario tree", bad);

    slices_.assign(static_cast<std::size_t>(horizon_) + 1, {});
    for (const TreeNode<S>& n : nodes_) slices_[static_cast<std::size_t>(n.time)].push_back(n.id);
  }
};

/// F_t-measurable function given by one value per time-t node. Entries in
/// minus_infinity override values with an explicit -infinity flag; only
/// super-hedging prices ever use that flag.
template <class S>
struct NodeFunction {
  int time = 0;
  std::map<NodeId, S> values;
  std::set<NodeId> minus_infinity;

  bool is_minus_inf(NodeId id) const { return minus_infinity.count(id) > 0; }

  const S& at(NodeId id) const {
    auto it = values.find(id);
    if (it == values.end())
      fail(ErrorCode::validation_error,
           "node function has no value for node " + std::to_string(id));
    return it->second;
  }
};

template <class S>
inline void check_node_function(const ScenarioTree<S>& tree, const NodeFunction<S>& f,
                                bool allow_minus_inf = false) {
  const auto& ids = tree.at_time(f.time);
  std::vector<std::string> bad;
  if (f.values.size() != ids.size())
    bad.push_back("expected " + std::to_string(ids.size()) + " values, found " +
                  std::to_string(f.values.size()));
  for (NodeId id : ids) {
    auto it = f.values.find(id);
    if (it == f.values.end()) {
      bad.push_back("missing value for node " + std::to_string(id));
      continue;
    }
    if (!f.is_minus_inf(id) && !scalar_traits<S>::finite(it->second))
      bad.push_back("non-finite value for node " + std::to_string(id));
  }
  if (!allow_minus_inf && !f.minus_infinity.empty())
    bad.push_back("minus-infinity flags not allowed here");
  for (NodeId id : f.minus_infinity)
    if (!f.values.count(id)) bad.push_back("flagged node " + std::to_string(id) + " has no entry");
  if (!bad.empty()) fail(ErrorCode::validation_error, "invalid node function", bad);
}

/// Lifts an F_t-measurable function to a later time by keeping it constant on
/// every subtree.
template <class S>
inline NodeFunction<S> lift(const ScenarioTree<S>& tree, const NodeFunction<S>& f, int to_time) {
  if (to_time < f.time) fail(ErrorCode::validation_error, "cannot lift backwards in time");
  NodeFunction<S> out;
  out.time = to_time;
  for (const auto& [id, v] : f.values)
    for (NodeId k : tree.subtree_at_time(id, to_time)) out.values[k] = v;
  return out;
}

template <class S>
inline NodeFunction<S> negate(const NodeFunction<S>& f) {
  NodeFunction<S> out;
  out.time = f.time;
  for (const auto& [id, v] : f.values) out.values[id] = S(-v);
  return out;
}

}  // namespace riskhedge
