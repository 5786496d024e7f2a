#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "seedsched/disjoint_set.hpp"
#include "seedsched/program_model.hpp"

namespace seedsched {

// Per-campaign coverage bookkeeping. The covered set only grows; neighbor
// queries go through a disjoint-set index that unions each conditional
// group, with a per-root count of still-uncovered members.
class CoverageStore {
 public:
  explicit CoverageStore(const ProgramModel& m)
      : model_(&m),
        covered_(m.branch_count(), 0),
        neighbors_(m.branch_count()),
        uncovered_in_group_(m.branch_count(), 0) {
    for (const auto& g : m.groups) {
      for (std::size_t i = 1; i < g.members.size(); ++i)
        neighbors_.unite(g.members[0], g.members[i]);
    }
    for (const auto& g : m.groups)
      uncovered_in_group_[neighbors_.find(g.members[0])] =
          static_cast<std::uint32_t>(g.members.size());
  }

  const ProgramModel& model() const { return *model_; }

  bool covered(BranchId b) const { return covered_[b] != 0; }
  std::uint32_t covered_count() const { return covered_count_; }

  // Returns the number of branches newly covered (duplicates counted once).
  std::uint32_t mark_covered(std::span<const BranchId> trace) {
    std::uint32_t added = 0;
    for (BranchId b : trace) {
      if (b >= covered_.size()) throw std::out_of_range("branch id out of range");
      if (covered_[b]) continue;
      covered_[b] = 1;
      ++covered_count_;
      ++added;
      if (model_->group_of(b) >= 0) --uncovered_in_group_[neighbors_.find(b)];
    }
    return added;
  }

  // For each distinct trace branch that belongs to a group, counts its
  // still-uncovered sibling arms (the branch itself never counts as its own
  // neighbor). Does not mutate the store.
  std::uint32_t undiscovered_neighbors(std::span<const BranchId> trace) const {
    std::vector<BranchId> distinct(trace.begin(), trace.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::uint32_t total = 0;
    for (BranchId b : distinct) {
      if (b >= covered_.size()) throw std::out_of_range("branch id out of range");
      if (model_->group_of(b) < 0) continue;
      std::uint32_t uncovered = uncovered_in_group_[neighbors_.find(b)];
      if (!covered_[b]) --uncovered;  // exclude the branch itself
      total += uncovered;
    }
    return total;
  }

 private:
  const ProgramModel* model_;
  std::vector<std::uint8_t> covered_;
  std::uint32_t covered_count_ = 0;
  DisjointSet neighbors_;
  std::vector<std::uint32_t> uncovered_in_group_;  // indexed by set root
};

}  // namespace seedsched
