#include "pktree/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pktree {

namespace {

// Distinct endpoint values of the rule intervals clipped to the region.
std::size_t distinct_endpoints(const DecisionTree& tree, const Node& n, int dim) {
  std::set<std::uint64_t> points;
  const Interval& range = n.region[dim];
  for (std::uint32_t ri : n.rules) {
    const Interval& r = tree.ruleset()[ri][dim];
    points.insert(std::max(r.lo, range.lo));
    points.insert(std::min(r.hi, range.hi));
  }
  return points.size();
}

// True when no cut in any dimension can make progress: every rule covers the
// whole node region in every cuttable dimension.
bool inseparable(const DecisionTree& tree, const Node& n) {
  for (int d = 0; d < kNumDims; ++d) {
    if (n.region.width(d) < 2) continue;
    for (std::uint32_t ri : n.rules) {
      const Interval& r = tree.ruleset()[ri][d];
      if (r.lo > n.region[d].lo || r.hi < n.region[d].hi) return false;
    }
  }
  return true;
}

bool any_cuttable_dim(const Node& n) {
  for (int d = 0; d < kNumDims; ++d) {
    if (n.region.width(d) >= 2) return true;
  }
  return false;
}

// Space measure of cutting this node into k pieces along dim:
// sum of child rule counts plus the number of cuts.
std::uint64_t cut_space_measure(const DecisionTree& tree, const Node& n, int dim,
                                std::uint64_t k) {
  const Interval range = n.region[dim];
  const std::uint64_t width = range.length();
  const std::uint64_t base = width / k;
  const std::uint64_t rem = width % k;
  std::uint64_t total = k;
  std::uint64_t lo = range.lo;
  for (std::uint64_t i = 0; i < k; ++i) {
    std::uint64_t span = base + (i < rem ? 1 : 0);
    Interval sub{lo, lo + span - 1};
    lo += span;
    for (std::uint32_t ri : n.rules) {
      if (tree.ruleset()[ri][dim].overlaps(sub)) ++total;
    }
  }
  return total;
}

void build_hicuts_from(DecisionTree& tree, NodeId root, const HiCutsParams& params) {
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (tree.is_terminal(id)) continue;
    const Node& n = tree.node(id);
    if (!any_cuttable_dim(n) || inseparable(tree, n)) {
      tree.force_leaf(id);
      continue;
    }

    int best_dim = -1;
    std::size_t best_score = 0;
    for (int d = 0; d < kNumDims; ++d) {
      if (tree.node(id).region.width(d) < 2) continue;
      std::size_t score = distinct_endpoints(tree, tree.node(id), d);
      if (best_dim < 0 || score > best_score) {
        best_dim = d;
        best_score = score;
      }
    }

    const std::uint64_t width = tree.node(id).region.width(best_dim);
    const std::uint64_t budget =
        static_cast<std::uint64_t>(params.spfac * static_cast<double>(tree.node(id).rules.size()));
    std::uint64_t chosen_k = 2;
    for (int k : kCutSizes) {
      if (k > params.max_cuts_per_node) break;
      std::uint64_t kk = std::min<std::uint64_t>(static_cast<std::uint64_t>(k), width);
      if (kk <= chosen_k) continue;
      if (cut_space_measure(tree, tree.node(id), best_dim, kk) <= budget) chosen_k = kk;
    }

    std::vector<NodeId> children = tree.apply_cut(id, best_dim, static_cast<int>(chosen_k));
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
  }
}

}  // namespace

DecisionTree build_hicuts(const RuleSet& rs, const HiCutsParams& params) {
  if (rs.empty()) throw std::invalid_argument("build_hicuts: rule set must be nonempty");
  if (params.spfac <= 0) throw std::invalid_argument("build_hicuts: spfac must be > 0");
  if (params.max_cuts_per_node < 2 || params.max_cuts_per_node > kMaxCut) {
    throw std::invalid_argument("build_hicuts: max_cuts_per_node must be in [2, 32]");
  }
  DecisionTree tree(rs, params.binth);
  build_hicuts_from(tree, tree.root(), params);
  return tree;
}

std::vector<DecisionTree> build_efficuts_baseline(const RuleSet& rs, const HiCutsParams& params) {
  if (rs.empty()) throw std::invalid_argument("build_efficuts_baseline: rule set must be nonempty");

  std::vector<std::uint32_t> all(rs.size());
  std::iota(all.begin(), all.end(), 0);
  auto groups = efficuts_groups(rs, all);

  std::vector<DecisionTree> forest;
  forest.reserve(groups.size());
  for (auto& [sig, members] : groups) {
    DecisionTree tree(rs, params.binth);
    Node& root = tree.node(tree.root());
    root.rules = std::move(members);
    root.efficuts_id = sig;
    build_hicuts_from(tree, tree.root(), params);
    forest.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace pktree
