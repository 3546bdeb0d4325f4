#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pktree/ruleset.hpp"

namespace pktree {

using NodeId = std::uint32_t;

inline constexpr int kDefaultBinth = 16;

// Discrete coverage thresholds used by partition state and simple partitions.
inline constexpr int kNumCoverageLevels = 8;
inline constexpr double kCoverageLevels[kNumCoverageLevels] = {0.0,  0.02, 0.04, 0.08,
                                                               0.16, 0.32, 0.64, 1.0};

// Coverage fraction of the full space above which a rule counts as "large"
// in a dimension for the EffiCuts-style separable grouping.
inline constexpr double kEffiCutsLargeFraction = 0.5;
inline constexpr int kNumEffiCutsSignatures = 1 << kNumDims;

inline constexpr int kCutSizes[] = {2, 4, 8, 16, 32};
inline constexpr int kNumCutSizes = 5;
inline constexpr int kMaxCut = 32;

struct CutAction {
  int dim = 0;
  int k = 2;  // requested number of sub-ranges; clamped to the region width on apply
  friend bool operator==(const CutAction&, const CutAction&) = default;
};

struct SimplePartitionAction {
  int dim = 0;
  int level = 1;  // index into kCoverageLevels
  friend bool operator==(const SimplePartitionAction&, const SimplePartitionAction&) = default;
};

struct EffiCutsPartitionAction {
  friend bool operator==(const EffiCutsPartitionAction&, const EffiCutsPartitionAction&) = default;
};

using Action = std::variant<CutAction, SimplePartitionAction, EffiCutsPartitionAction>;

enum class NodeKind : std::uint8_t { Leaf, Cut, Partition };

// Per-dimension coverage bounds accumulated by simple partitions, as indices
// into kCoverageLevels. A fresh node spans the whole range: [0%, 100%].
struct PartitionBounds {
  std::uint8_t min_level = 0;
  std::uint8_t max_level = kNumCoverageLevels - 1;
  friend bool operator==(const PartitionBounds&, const PartitionBounds&) = default;
};

struct Node {
  NodeId id = 0;
  Region region;
  std::vector<std::uint32_t> rules;  // indices into the owning RuleSet, priority order
  std::array<PartitionBounds, kNumDims> partition_state{};
  std::optional<std::uint8_t> efficuts_id;  // 5-bit largeness signature
  std::uint32_t depth = 0;
  NodeKind kind = NodeKind::Leaf;
  bool forced_leaf = false;  // leaf created by truncation; may exceed binth
  std::optional<Action> action;
  std::vector<NodeId> children;

  bool is_leaf() const { return kind == NodeKind::Leaf; }
};

class DecisionTree {
 public:
  DecisionTree(const RuleSet& rules, int binth);

  const RuleSet& ruleset() const { return *rules_; }
  int binth() const { return binth_; }
  NodeId root() const { return 0; }
  std::size_t node_count() const { return nodes_.size(); }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  Node& node(NodeId id) { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Number of cut applications whose requested k exceeded the range width.
  std::size_t clamped_cuts() const { return clamped_cuts_; }
  // Number of simple partitions that produced a single child.
  std::size_t degenerate_partitions() const { return degenerate_partitions_; }

  bool is_terminal(NodeId id) const {
    return node(id).rules.size() <= static_cast<std::size_t>(binth_);
  }

  // True once no expandable (non-terminal, non-forced) leaf remains.
  bool complete() const;

  // Marks a node as a leaf kept despite exceeding binth (truncation).
  void force_leaf(NodeId id);

  std::vector<NodeId> apply_cut(NodeId id, int dim, int k);
  std::vector<NodeId> apply_partition_simple(NodeId id, int dim, int level);
  std::vector<NodeId> apply_partition_efficuts(NodeId id);
  std::vector<NodeId> apply(NodeId id, const Action& action);

  friend class TreeCodec;

 private:
  Node& new_child(const Node& parent);
  void check_expandable(NodeId id, const char* op) const;

  const RuleSet* rules_;
  int binth_;
  std::vector<Node> nodes_;
  std::size_t clamped_cuts_ = 0;
  std::size_t degenerate_partitions_ = 0;
};

// Groups rule indices by their 5-bit largeness signature: bit d is set when
// the rule covers at least kEffiCutsLargeFraction of the full space in
// dimension d. Signatures ascend; each group keeps priority order.
std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>> efficuts_groups(
    const RuleSet& rs, const std::vector<std::uint32_t>& rule_indices);

// Classification time of the subtree: 0 for a leaf; one unit per internal
// node, max over cut children, sum over partition children. Throws if the
// subtree still has an expandable leaf.
std::int64_t subtree_time(const DecisionTree& tree, NodeId id);

// Memory footprint in bytes: internal node = 16 + 4 per child reference,
// leaf = 16 + 4 per stored rule reference; children sum for both kinds.
std::int64_t subtree_space(const DecisionTree& tree, NodeId id);

// Walks one tree for a packet: descend the matching child at cut nodes,
// every child at partition nodes, linear-scan leaf rules.
std::optional<std::uint32_t> lookup(const DecisionTree& tree, const Packet& pkt);

// Highest-priority match across all trees of a forest.
std::optional<std::uint32_t> lookup(std::span<const DecisionTree> trees, const Packet& pkt);

struct LevelStats {
  std::size_t nodes = 0;
  std::array<std::size_t, kNumDims> cuts_by_dim{};
  std::size_t partitions = 0;
};

struct StatsReport {
  std::int64_t time = 0;          // max over trees of the Eq-style subtree time
  std::int64_t total_bytes = 0;   // sum over trees
  double bytes_per_rule = 0.0;
  std::size_t node_count = 0;
  std::size_t rule_refs = 0;      // total rule references stored in leaves
  double replication = 0.0;       // rule_refs / |RuleSet|
  std::uint32_t max_depth = 0;
  std::size_t tree_count = 0;
  std::vector<LevelStats> levels;
};

StatsReport tree_stats(std::span<const DecisionTree> trees);

std::string level_histogram_csv(const StatsReport& stats);

// JSON export/import of a tree forest. The export embeds a hash of the rule
// file so evaluation can refuse mismatched inputs.
class TreeCodec {
 public:
  static std::string to_json(std::span<const DecisionTree> trees, std::uint64_t rules_hash);
  static std::vector<DecisionTree> from_json(const std::string& text, const RuleSet& rules,
                                             std::uint64_t* rules_hash = nullptr);
};

std::string to_dot(const DecisionTree& tree);

// FNV-1a, used to fingerprint rule files in exports and manifests.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace pktree
