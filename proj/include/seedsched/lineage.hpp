#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seedsched/features.hpp"
#include "seedsched/seed.hpp"

// Reconstructs input descendant trees. A seed selected for concolic execution
// becomes a root; concolic mutants and their GA offspring attach below it and
// the node count of that subtree within a time window is the training label.

namespace seedsched {

class LineageIndex {
 public:
  // Parent must already be recorded; ids are unique.
  void record_seed(const Seed& s) {
    if (nodes_.count(s.id)) throw std::invalid_argument("duplicate seed id");
    if (s.parent.has_value() == (s.origin == SeedOrigin::kInitial))
      throw std::invalid_argument("parent link inconsistent with origin");
    if (s.parent) {
      auto it = nodes_.find(*s.parent);
      if (it == nodes_.end()) throw std::invalid_argument("unknown parent seed");
      if (s.created_at < it->second.created_at)
        throw std::invalid_argument("child created before parent");
      it->second.children.push_back(s.id);
    }
    nodes_.emplace(s.id, Node{s.parent, s.created_at, {}});
  }

  bool contains(SeedId id) const { return nodes_.count(id) != 0; }
  std::size_t size() const { return nodes_.size(); }

  void mark_root(SeedId id) {
    if (!nodes_.count(id)) throw std::invalid_argument("unknown seed id");
    roots_.insert(id);
  }
  bool is_root(SeedId id) const { return roots_.count(id) != 0; }

  const std::vector<SeedId>& children_of(SeedId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::invalid_argument("unknown seed id");
    return it->second.children;
  }

  std::optional<SeedId> parent_of(SeedId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::invalid_argument("unknown seed id");
    return it->second.parent;
  }

  // Number of nodes in the subtree rooted at `root` (root included) created
  // at or before `cutoff`. Descendants that were themselves selected as roots
  // belong to their own tree and are not counted here, so no seed ever
  // contributes to two labels.
  std::uint32_t descendant_tree_size(SeedId root, Tick cutoff) const {
    if (!roots_.count(root)) throw std::invalid_argument("seed was never selected as a root");
    const Node& r = nodes_.at(root);
    if (r.created_at > cutoff) return 0;
    std::uint32_t count = 0;
    std::vector<SeedId> stack{root};
    while (!stack.empty()) {
      SeedId id = stack.back();
      stack.pop_back();
      ++count;
      for (SeedId c : nodes_.at(id).children) {
        if (roots_.count(c)) continue;
        if (nodes_.at(c).created_at > cutoff) continue;
        stack.push_back(c);
      }
    }
    return count;
  }

 private:
  struct Node {
    std::optional<SeedId> parent;
    Tick created_at = 0;
    std::vector<SeedId> children;
  };
  std::unordered_map<SeedId, Node> nodes_;
  std::unordered_set<SeedId> roots_;
};

struct PendingLabel {
  SeedId root = 0;
  FeatureVector features_at_selection;
  Tick selected_at = 0;
  Tick matures_at = 0;  // selected_at + label window
};

// Emits (features, tree size at cutoff=now) for every entry whose maturity
// tick has been reached (boundary inclusive) and removes them from pending,
// preserving selection order.
inline std::vector<std::pair<FeatureVector, double>> mature_labels(
    std::vector<PendingLabel>& pending, const LineageIndex& index, Tick now) {
  std::vector<std::pair<FeatureVector, double>> out;
  std::vector<PendingLabel> keep;
  keep.reserve(pending.size());
  for (auto& p : pending) {
    if (p.matures_at <= now) {
      out.emplace_back(p.features_at_selection,
                       static_cast<double>(index.descendant_tree_size(p.root, now)));
    } else {
      keep.push_back(std::move(p));
    }
  }
  pending = std::move(keep);
  return out;
}

}  // namespace seedsched
