#pragma once

// Independent brute-force oracles for the library's derived quantities.
// These deliberately avoid the production code paths: reachability is a
// recursive DFS over raw successor lists, neighbor counts scan the group
// table, tree sizes walk raw parent links, and the ridge solution comes from
// a dense solve.

#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "seedsched/coverage.hpp"
#include "seedsched/features.hpp"
#include "seedsched/program_model.hpp"
#include "seedsched/seed.hpp"

namespace oracles {

using namespace seedsched;

inline void reach_dfs(const ProgramModel& m, BranchId b, std::set<BranchId>& seen) {
  if (!seen.insert(b).second) return;
  for (BranchId s : m.successors[b]) reach_dfs(m, s, seen);
}

inline std::uint32_t brute_reachable_labels(const ProgramModel& m, BranchId from) {
  std::set<BranchId> seen;
  reach_dfs(m, from, seen);
  std::uint32_t sum = 0;
  for (BranchId b : seen) sum += m.branches[b].local_labels;
  return sum;
}

// Neighbor count by scanning the raw group table.
inline std::uint32_t brute_undiscovered_neighbors(const ProgramModel& m,
                                                  const std::set<BranchId>& covered,
                                                  const std::vector<BranchId>& trace) {
  std::set<BranchId> distinct(trace.begin(), trace.end());
  std::uint32_t total = 0;
  for (BranchId b : distinct) {
    for (const auto& g : m.groups) {
      bool member = false;
      for (BranchId x : g.members) member = member || x == b;
      if (!member) continue;
      for (BranchId x : g.members)
        if (x != b && !covered.count(x)) ++total;
    }
  }
  return total;
}

inline FeatureVector brute_features(const Seed& seed, const ProgramModel& m,
                                    const std::set<BranchId>& covered,
                                    std::uint32_t queue_size) {
  FeatureVector v;
  std::set<BranchId> distinct(seed.trace.begin(), seed.trace.end());
  for (BranchId b : distinct) {
    v.reachable_labels += brute_reachable_labels(m, b);
    v.reached_labels += m.branches[b].local_labels;
  }
  v.undiscovered_neighbors = brute_undiscovered_neighbors(m, covered, seed.trace);
  for (BranchId b : seed.trace) {
    v.external_calls += m.branches[b].external_calls;
    v.cmp_count += m.branches[b].cmp_count;
    v.indirect_calls += m.branches[b].indirect_calls;
  }
  v.path_length = static_cast<std::uint32_t>(seed.trace.size());
  v.input_size = seed.size;
  v.first_new_cov = seed.first_new_cov ? 1 : 0;
  v.queue_size = queue_size;
  return v;
}

// Flat description of a lineage forest for the BFS counting oracle.
struct FlatLineage {
  std::map<SeedId, std::optional<SeedId>> parent;
  std::map<SeedId, Tick> created;
  std::set<SeedId> roots;
};

// Counts via parent chains: a node belongs to the tree of its nearest root
// ancestor (a root belongs to its own tree).
inline std::uint32_t brute_tree_size(const FlatLineage& f, SeedId root, Tick cutoff) {
  std::uint32_t count = 0;
  for (const auto& [id, _] : f.parent) {
    if (f.created.at(id) > cutoff) continue;
    SeedId cur = id;
    bool belongs = false;
    while (true) {
      if (f.roots.count(cur)) {
        belongs = cur == root;
        break;
      }
      auto p = f.parent.at(cur);
      if (!p) break;
      cur = *p;
    }
    if (belongs) ++count;
  }
  return count;
}

// One pass over all nodes: each node walks its parent chain to the nearest
// root and credits that root's tree.
inline std::map<SeedId, std::uint32_t> brute_tree_sizes(const FlatLineage& f, Tick cutoff) {
  std::map<SeedId, std::uint32_t> counts;
  for (SeedId r : f.roots) counts[r] = 0;
  for (const auto& [id, _] : f.parent) {
    if (f.created.at(id) > cutoff) continue;
    SeedId cur = id;
    while (true) {
      if (f.roots.count(cur)) {
        ++counts[cur];
        break;
      }
      auto p = f.parent.at(cur);
      if (!p) break;
      cur = *p;
    }
  }
  return counts;
}

// Batch ridge solution (sum x x^T + lambda I) w = sum x y by dense solve.
inline Eigen::VectorXd batch_ridge(const std::vector<Eigen::VectorXd>& xs,
                                   const std::vector<double>& ys, double lambda) {
  const int d = static_cast<int>(xs.front().size());
  Eigen::MatrixXd a = lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a += xs[i] * xs[i].transpose();
    b += xs[i] * ys[i];
  }
  return a.ldlt().solve(b);
}

}  // namespace oracles
