#pragma once

#include <vector>

#include "pktree/tree.hpp"

namespace pktree {

struct HiCutsParams {
  double spfac = 1.0;         // space-measure factor
  int max_cuts_per_node = 32; // cap on k, must be in {2..32}
  int binth = kDefaultBinth;
};

// Recursive equal-sized cutting: at each non-terminal node pick the dimension
// with the most distinct rule-interval endpoints inside the node region, then
// the largest k in {2,4,8,16,32} whose space measure
//   sum(child rule counts) + k
// stays within spfac * (node rule count). k=2 is always allowed so the
// builder makes progress even at tight spfac. Nodes whose rules cannot be
// separated by any cut become leaves regardless of binth.
DecisionTree build_hicuts(const RuleSet& rs, const HiCutsParams& params);

// Separable grouping at a virtual root (rules grouped by which dimensions
// they cover largely), then one HiCuts-style tree per group.
std::vector<DecisionTree> build_efficuts_baseline(const RuleSet& rs, const HiCutsParams& params);

}  // namespace pktree
