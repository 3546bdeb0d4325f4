#include "pktree/tree.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pktree {

namespace {

using json = nlohmann::ordered_json;

double coverage_fraction(const Interval& rule_range, const Interval& region_range) {
  std::uint64_t lo = std::max(rule_range.lo, region_range.lo);
  std::uint64_t hi = std::min(rule_range.hi, region_range.hi);
  if (lo > hi) return 0.0;
  return static_cast<double>(hi - lo + 1) / static_cast<double>(region_range.length());
}

std::uint8_t efficuts_signature(const Rule& rule) {
  std::uint8_t sig = 0;
  for (int d = 0; d < kNumDims; ++d) {
    double frac =
        static_cast<double>(rule[d].length()) / static_cast<double>(dim_max(d) + 1);
    if (frac >= kEffiCutsLargeFraction) sig |= static_cast<std::uint8_t>(1u << d);
  }
  return sig;
}

}  // namespace

std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>> efficuts_groups(
    const RuleSet& rs, const std::vector<std::uint32_t>& rule_indices) {
  std::map<std::uint8_t, std::vector<std::uint32_t>> groups;
  for (std::uint32_t ri : rule_indices) {
    groups[efficuts_signature(rs[ri])].push_back(ri);
  }
  return {groups.begin(), groups.end()};
}

DecisionTree::DecisionTree(const RuleSet& rules, int binth) : rules_(&rules), binth_(binth) {
  if (rules.empty()) throw std::invalid_argument("DecisionTree: rule set must be nonempty");
  if (binth < 0) throw std::invalid_argument("DecisionTree: binth must be >= 0");
  Node root;
  root.id = 0;
  root.region = Region::full_space();
  root.rules.resize(rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) root.rules[i] = static_cast<std::uint32_t>(i);
  nodes_.push_back(std::move(root));
}

bool DecisionTree::complete() const {
  for (const Node& n : nodes_) {
    if (n.is_leaf() && !n.forced_leaf &&
        n.rules.size() > static_cast<std::size_t>(binth_)) {
      return false;
    }
  }
  return true;
}

void DecisionTree::force_leaf(NodeId id) {
  Node& n = node(id);
  if (!n.is_leaf()) throw std::logic_error("force_leaf: node is not a leaf");
  n.forced_leaf = true;
}

void DecisionTree::check_expandable(NodeId id, const char* op) const {
  const Node& n = node(id);
  if (!n.is_leaf() || n.forced_leaf) {
    throw std::logic_error(std::string(op) + ": node is not an expandable leaf");
  }
  if (is_terminal(id)) {
    throw std::logic_error(std::string(op) + ": node is already terminal");
  }
}

Node& DecisionTree::new_child(const Node& parent) {
  Node child;
  child.id = static_cast<NodeId>(nodes_.size());
  child.region = parent.region;
  child.partition_state = parent.partition_state;
  child.efficuts_id = parent.efficuts_id;
  child.depth = parent.depth + 1;
  nodes_.push_back(std::move(child));
  return nodes_.back();
}

std::vector<NodeId> DecisionTree::apply_cut(NodeId id, int dim, int k) {
  check_expandable(id, "apply_cut");
  if (dim < 0 || dim >= kNumDims) throw std::logic_error("apply_cut: bad dimension");
  if (k < 2) throw std::logic_error("apply_cut: k must be >= 2");

  const std::uint64_t width = node(id).region.width(dim);
  if (width < 2) throw std::logic_error("apply_cut: cannot cut a unit-width dimension");
  std::uint64_t cuts = static_cast<std::uint64_t>(k);
  if (cuts > width) {
    cuts = width;
    ++clamped_cuts_;
  }

  // Near-equal contiguous sub-ranges; the first (width mod k) children get
  // one extra unit.
  const Interval parent_range = node(id).region[dim];
  const std::uint64_t base = width / cuts;
  const std::uint64_t rem = width % cuts;
  const std::vector<std::uint32_t> parent_rules = node(id).rules;

  std::vector<NodeId> children;
  children.reserve(cuts);
  std::uint64_t lo = parent_range.lo;
  for (std::uint64_t i = 0; i < cuts; ++i) {
    std::uint64_t span = base + (i < rem ? 1 : 0);
    Interval sub{lo, lo + span - 1};
    lo += span;
    Node& child = new_child(node(id));
    child.region[dim] = sub;
    for (std::uint32_t ri : parent_rules) {
      if ((*rules_)[ri][dim].overlaps(sub)) child.rules.push_back(ri);
    }
    children.push_back(child.id);
  }

  Node& parent = node(id);
  parent.kind = NodeKind::Cut;
  parent.action = CutAction{dim, k};
  parent.children = children;
  return children;
}

std::vector<NodeId> DecisionTree::apply_partition_simple(NodeId id, int dim, int level) {
  check_expandable(id, "apply_partition_simple");
  if (dim < 0 || dim >= kNumDims) throw std::logic_error("apply_partition_simple: bad dimension");
  if (level < 0 || level >= kNumCoverageLevels) {
    throw std::logic_error("apply_partition_simple: level out of range");
  }

  const double threshold = kCoverageLevels[level];
  const Interval region_range = node(id).region[dim];
  std::vector<std::uint32_t> large, small;
  for (std::uint32_t ri : node(id).rules) {
    double f = coverage_fraction((*rules_)[ri][dim], region_range);
    (f >= threshold ? large : small).push_back(ri);
  }

  std::vector<NodeId> children;
  if (!large.empty()) {
    Node& child = new_child(node(id));
    child.rules = std::move(large);
    child.partition_state[dim].min_level = static_cast<std::uint8_t>(level);
    children.push_back(child.id);
  }
  if (!small.empty()) {
    Node& child = new_child(node(id));
    child.rules = std::move(small);
    child.partition_state[dim].max_level = static_cast<std::uint8_t>(level);
    children.push_back(child.id);
  }
  if (children.size() < 2) ++degenerate_partitions_;

  Node& parent = node(id);
  parent.kind = NodeKind::Partition;
  parent.action = SimplePartitionAction{dim, level};
  parent.children = children;
  return children;
}

std::vector<NodeId> DecisionTree::apply_partition_efficuts(NodeId id) {
  if (id != root()) throw std::logic_error("apply_partition_efficuts: only valid at the root");
  check_expandable(id, "apply_partition_efficuts");

  auto groups = efficuts_groups(*rules_, node(id).rules);

  std::vector<NodeId> children;
  children.reserve(groups.size());
  for (auto& [sig, members] : groups) {
    Node& child = new_child(node(id));
    child.rules = std::move(members);
    child.efficuts_id = sig;
    children.push_back(child.id);
  }

  Node& parent = node(id);
  parent.kind = NodeKind::Partition;
  parent.action = EffiCutsPartitionAction{};
  parent.children = children;
  return children;
}

std::vector<NodeId> DecisionTree::apply(NodeId id, const Action& action) {
  return std::visit(
      [&](const auto& a) -> std::vector<NodeId> {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CutAction>) {
          return apply_cut(id, a.dim, a.k);
        } else if constexpr (std::is_same_v<T, SimplePartitionAction>) {
          return apply_partition_simple(id, a.dim, a.level);
        } else {
          return apply_partition_efficuts(id);
        }
      },
      action);
}

std::int64_t subtree_time(const DecisionTree& tree, NodeId id) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) {
    if (!n.forced_leaf && !tree.is_terminal(id)) {
      throw std::logic_error("subtree_time: subtree has an unbuilt leaf");
    }
    return 0;
  }
  if (n.kind == NodeKind::Cut) {
    std::int64_t worst = 0;
    for (NodeId c : n.children) worst = std::max(worst, subtree_time(tree, c));
    return 1 + worst;
  }
  std::int64_t total = 0;
  for (NodeId c : n.children) total += subtree_time(tree, c);
  return 1 + total;
}

std::int64_t subtree_space(const DecisionTree& tree, NodeId id) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) {
    if (!n.forced_leaf && !tree.is_terminal(id)) {
      throw std::logic_error("subtree_space: subtree has an unbuilt leaf");
    }
    return 16 + 4 * static_cast<std::int64_t>(n.rules.size());
  }
  std::int64_t total = 16 + 4 * static_cast<std::int64_t>(n.children.size());
  for (NodeId c : n.children) total += subtree_space(tree, c);
  return total;
}

std::optional<std::uint32_t> lookup(const DecisionTree& tree, const Packet& pkt) {
  std::optional<std::uint32_t> best;
  std::vector<NodeId> stack{tree.root()};
  while (!stack.empty()) {
    const Node& n = tree.node(stack.back());
    stack.pop_back();
    if (n.is_leaf()) {
      for (std::uint32_t ri : n.rules) {
        if (best && *best <= ri) break;  // rules are in priority order
        if (rule_matches(tree.ruleset()[ri], pkt)) {
          best = ri;
          break;
        }
      }
      continue;
    }
    if (n.kind == NodeKind::Cut) {
      int dim = std::get<CutAction>(*n.action).dim;
      std::uint64_t v = pkt[dim];
      // Children are ordered by range; binary search the one containing v.
      auto it = std::partition_point(n.children.begin(), n.children.end(), [&](NodeId c) {
        return tree.node(c).region[dim].hi < v;
      });
      if (it != n.children.end() && tree.node(*it).region[dim].contains(v)) {
        stack.push_back(*it);
      }
    } else {
      for (NodeId c : n.children) stack.push_back(c);
    }
  }
  return best;
}

std::optional<std::uint32_t> lookup(std::span<const DecisionTree> trees, const Packet& pkt) {
  std::optional<std::uint32_t> best;
  for (const DecisionTree& tree : trees) {
    auto r = lookup(tree, pkt);
    if (r && (!best || *r < *best)) best = r;
  }
  return best;
}

StatsReport tree_stats(std::span<const DecisionTree> trees) {
  StatsReport report;
  report.tree_count = trees.size();
  if (trees.empty()) return report;

  const std::size_t num_rules = trees.front().ruleset().size();
  for (const DecisionTree& tree : trees) {
    report.time = std::max(report.time, subtree_time(tree, tree.root()));
    report.total_bytes += subtree_space(tree, tree.root());
    report.node_count += tree.node_count();
    for (const Node& n : tree.nodes()) {
      report.max_depth = std::max(report.max_depth, n.depth);
      if (report.levels.size() <= n.depth) report.levels.resize(n.depth + 1);
      LevelStats& level = report.levels[n.depth];
      ++level.nodes;
      if (n.is_leaf()) {
        report.rule_refs += n.rules.size();
      } else if (n.kind == NodeKind::Cut) {
        ++level.cuts_by_dim[static_cast<std::size_t>(std::get<CutAction>(*n.action).dim)];
      } else {
        ++level.partitions;
      }
    }
  }
  report.bytes_per_rule = static_cast<double>(report.total_bytes) / static_cast<double>(num_rules);
  report.replication = static_cast<double>(report.rule_refs) / static_cast<double>(num_rules);
  return report;
}

std::string level_histogram_csv(const StatsReport& stats) {
  std::ostringstream out;
  out << "level,nodes";
  for (int d = 0; d < kNumDims; ++d) out << ",cut_" << kDimNames[d];
  out << ",partitions\n";
  for (std::size_t level = 0; level < stats.levels.size(); ++level) {
    const LevelStats& ls = stats.levels[level];
    out << level << ',' << ls.nodes;
    for (int d = 0; d < kNumDims; ++d) out << ',' << ls.cuts_by_dim[static_cast<std::size_t>(d)];
    out << ',' << ls.partitions << '\n';
  }
  return out.str();
}

namespace {

json action_to_json(const Action& action) {
  return std::visit(
      [](const auto& a) -> json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CutAction>) {
          return {{"type", "cut"}, {"dim", a.dim}, {"k", a.k}};
        } else if constexpr (std::is_same_v<T, SimplePartitionAction>) {
          return {{"type", "partition_simple"}, {"dim", a.dim}, {"level", a.level}};
        } else {
          return {{"type", "partition_efficuts"}};
        }
      },
      action);
}

Action action_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "cut") return CutAction{j.at("dim").get<int>(), j.at("k").get<int>()};
  if (type == "partition_simple") {
    return SimplePartitionAction{j.at("dim").get<int>(), j.at("level").get<int>()};
  }
  if (type == "partition_efficuts") return EffiCutsPartitionAction{};
  throw std::runtime_error("unknown action type: " + type);
}

}  // namespace

std::string TreeCodec::to_json(std::span<const DecisionTree> trees, std::uint64_t rules_hash) {
  json doc;
  doc["format"] = "pktree-trees";
  doc["version"] = 1;
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(rules_hash));
  doc["rules_hash"] = hash_hex;
  doc["trees"] = json::array();
  for (const DecisionTree& tree : trees) {
    json tj;
    tj["binth"] = tree.binth();
    tj["nodes"] = json::array();
    for (const Node& n : tree.nodes()) {
      json nj;
      nj["id"] = n.id;
      nj["depth"] = n.depth;
      nj["kind"] = n.kind == NodeKind::Leaf ? "leaf"
                   : n.kind == NodeKind::Cut ? "cut"
                                             : "partition";
      if (n.forced_leaf) nj["forced"] = true;
      json region = json::array();
      for (int d = 0; d < kNumDims; ++d) region.push_back({n.region[d].lo, n.region[d].hi});
      nj["region"] = region;
      json pstate = json::array();
      for (int d = 0; d < kNumDims; ++d) {
        pstate.push_back({n.partition_state[d].min_level, n.partition_state[d].max_level});
      }
      nj["partition_state"] = pstate;
      if (n.efficuts_id) nj["efficuts_id"] = *n.efficuts_id;
      if (n.action) nj["action"] = action_to_json(*n.action);
      nj["children"] = n.children;
      nj["rules"] = n.rules;
      tj["nodes"].push_back(std::move(nj));
    }
    doc["trees"].push_back(std::move(tj));
  }
  return doc.dump();
}

std::vector<DecisionTree> TreeCodec::from_json(const std::string& text, const RuleSet& rules,
                                               std::uint64_t* rules_hash) {
  json doc = json::parse(text);
  if (doc.at("format").get<std::string>() != "pktree-trees" || doc.at("version").get<int>() != 1) {
    throw std::runtime_error("unsupported tree export format");
  }
  if (rules_hash) {
    *rules_hash = std::stoull(doc.at("rules_hash").get<std::string>(), nullptr, 16);
  }
  std::vector<DecisionTree> trees;
  for (const json& tj : doc.at("trees")) {
    DecisionTree tree(rules, tj.at("binth").get<int>());
    tree.nodes_.clear();
    for (const json& nj : tj.at("nodes")) {
      Node n;
      n.id = nj.at("id").get<NodeId>();
      n.depth = nj.at("depth").get<std::uint32_t>();
      const std::string kind = nj.at("kind").get<std::string>();
      n.kind = kind == "leaf" ? NodeKind::Leaf : kind == "cut" ? NodeKind::Cut : NodeKind::Partition;
      n.forced_leaf = nj.value("forced", false);
      const json& region = nj.at("region");
      for (int d = 0; d < kNumDims; ++d) {
        n.region[d] = {region[d][0].get<std::uint64_t>(), region[d][1].get<std::uint64_t>()};
      }
      const json& pstate = nj.at("partition_state");
      for (int d = 0; d < kNumDims; ++d) {
        n.partition_state[d] = {pstate[d][0].get<std::uint8_t>(),
                                pstate[d][1].get<std::uint8_t>()};
      }
      if (nj.contains("efficuts_id")) n.efficuts_id = nj.at("efficuts_id").get<std::uint8_t>();
      if (nj.contains("action")) n.action = action_from_json(nj.at("action"));
      n.children = nj.at("children").get<std::vector<NodeId>>();
      n.rules = nj.at("rules").get<std::vector<std::uint32_t>>();
      tree.nodes_.push_back(std::move(n));
    }
    if (tree.nodes_.empty()) throw std::runtime_error("tree export has no nodes");
    for (const Node& n : tree.nodes_) {
      for (NodeId c : n.children) {
        if (c >= tree.nodes_.size()) throw std::runtime_error("tree export has a dangling child id");
      }
      for (std::uint32_t ri : n.rules) {
        if (ri >= rules.size()) throw std::runtime_error("tree export references unknown rule");
      }
    }
    trees.push_back(std::move(tree));
  }
  return trees;
}

std::string to_dot(const DecisionTree& tree) {
  std::ostringstream out;
  out << "digraph tree {\n  node [shape=box];\n";
  for (const Node& n : tree.nodes()) {
    out << "  n" << n.id << " [label=\"#" << n.id << " d" << n.depth << "\\n" << n.rules.size()
        << " rules";
    if (n.action) {
      json a = action_to_json(*n.action);
      out << "\\n" << a.at("type").get<std::string>();
      if (a.contains("dim")) out << " " << kDimNames[a.at("dim").get<int>()];
      if (a.contains("k")) out << " x" << a.at("k").get<int>();
    }
    out << "\"];\n";
    for (NodeId c : n.children) out << "  n" << n.id << " -> n" << c << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace pktree
