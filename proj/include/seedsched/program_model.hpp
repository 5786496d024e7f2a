#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seedsched/csv.hpp"
#include "seedsched/rng.hpp"

// Synthetic target programs: a branch graph with conditional groups,
// sanitizer-label annotations and per-branch hardness. Stands in for an
// instrumented binary; everything downstream (fuzzer, concolic executor,
// feature extraction) works against this model.

namespace seedsched {

using BranchId = std::uint32_t;

// magic_width == 0 means an ordinary branch; > 0 means the branch is guarded
// by a magic-value comparison of that bit width. The simulated fuzzer flips
// into such a branch with probability 2^-width; the concolic executor solves
// it deterministically.
struct BranchAnnotation {
  std::uint32_t reachable_labels = 0;  // filled from the reachability table
  std::uint32_t local_labels = 0;      // sanitizer checks sitting on this branch
  std::uint32_t cmp_count = 0;
  std::uint32_t external_calls = 0;
  std::uint32_t indirect_calls = 0;
  std::uint8_t magic_width = 0;
  std::uint8_t loop_max = 0;  // loop head: executes 1..(1+loop_max) times per pass

  bool is_hard() const { return magic_width > 0; }
};

// Branches stemming from the same conditional statement. An execution takes
// exactly one member; the others are its neighbor branches.
struct ConditionalGroup {
  std::vector<BranchId> members;  // sorted, size >= 2
};

enum class LabelPlacement : std::uint8_t { kUniform, kHardGuarded, kDeep };
enum class HardPlacement : std::uint8_t { kUniform, kGateway };

struct GenParams {
  std::uint32_t branch_count = 100;
  std::uint32_t group_size_min = 2;
  std::uint32_t group_size_max = 4;
  double hard_fraction = 0.2;
  double label_density = 0.15;

  // annotation ranges
  std::uint32_t cmp_max = 5;
  std::uint32_t external_max = 2;
  std::uint32_t indirect_max = 1;
  std::uint32_t local_label_max = 3;
  std::uint32_t magic_width_min = 16;
  std::uint32_t magic_width_max = 24;

  // topology / placement shaping
  double chain_bias = 0.5;  // probability a conditional attaches to the previous one
  LabelPlacement label_placement = LabelPlacement::kUniform;
  HardPlacement hard_placement = HardPlacement::kUniform;
  // with kGateway: how many hard branches go to the biggest-subtree arms
  // before the rest fall back to uniform placement (0 = no cap), and an
  // upper bound on the subtree mass a gate may guard (0 = unbounded) --
  // bounding it spreads the gated mass over many medium pockets instead of
  // a few decisive mega-gates
  std::uint32_t hard_gateway_cap = 0;
  std::uint32_t gateway_max_mass = 0;

  // loop heads: input-dependent iteration counts make distinct paths
  double loop_fraction = 0.1;
  std::uint32_t loop_iters_max = 3;

  // how many input bytes a path consumes (drives synthetic seed sizes)
  std::uint32_t size_base = 4;
  std::uint32_t size_per_branch = 1;
  std::uint32_t size_jitter = 2;
};

class ProgramModel {
 public:
  std::string name;
  std::uint64_t gen_seed = 0;
  GenParams params;

  std::vector<BranchAnnotation> branches;
  std::vector<ConditionalGroup> groups;
  std::vector<std::vector<BranchId>> successors;
  BranchId entry = 0;

  std::uint32_t branch_count() const { return static_cast<std::uint32_t>(branches.size()); }

  // -1 when the branch belongs to no conditional group.
  std::int32_t group_of(BranchId b) const { return group_of_[b]; }

  const std::vector<BranchId>& group_members(BranchId b) const {
    return groups[static_cast<std::size_t>(group_of_[b])].members;
  }

  std::uint32_t depth_of(BranchId b) const { return depth_[b]; }
  std::uint32_t max_depth() const { return max_depth_; }

  // Validates invariants and computes the derived tables. Must be called
  // after the public fields are filled in; generate_program and load_program
  // do this themselves.
  void finalize() {
    const std::size_t n = branches.size();
    if (n == 0) throw std::invalid_argument("program has no branches");
    if (entry >= n) throw std::invalid_argument("entry branch out of range");
    if (successors.size() != n) throw std::invalid_argument("successor table size mismatch");
    for (const auto& succ : successors)
      for (BranchId s : succ)
        if (s >= n) throw std::invalid_argument("successor id out of range");

    group_of_.assign(n, -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      auto& members = groups[g].members;
      if (members.size() < 2) throw std::invalid_argument("conditional group smaller than 2");
      std::sort(members.begin(), members.end());
      for (BranchId m : members) {
        if (m >= n) throw std::invalid_argument("group member out of range");
        if (group_of_[m] != -1) throw std::invalid_argument("branch in two groups");
        group_of_[m] = static_cast<std::int32_t>(g);
      }
    }

    compute_depths();
    for (std::size_t b = 0; b < n; ++b)
      if (depth_[b] == kUnreachable)
        throw std::invalid_argument("branch " + std::to_string(b) + " unreachable from entry");

    compute_reachable_labels();
    for (std::size_t b = 0; b < n; ++b)
      branches[b].reachable_labels = reachable_table_[b];
  }

  // Sum of local_labels over every branch reachable from b (b included).
  // Computed once per model.
  const std::vector<std::uint32_t>& reachable_label_table() const { return reachable_table_; }

 private:
  static constexpr std::uint32_t kUnreachable = 0xffffffffu;

  void compute_depths() {
    const std::size_t n = branches.size();
    depth_.assign(n, kUnreachable);
    max_depth_ = 0;
    std::vector<BranchId> queue{entry};
    depth_[entry] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      BranchId b = queue[head];
      for (BranchId s : successors[b]) {
        if (depth_[s] == kUnreachable) {
          depth_[s] = depth_[b] + 1;
          max_depth_ = std::max(max_depth_, depth_[s]);
          queue.push_back(s);
        }
      }
    }
  }

  void compute_reachable_labels() {
    const std::size_t n = branches.size();
    reachable_table_.assign(n, 0);
    std::vector<std::uint32_t> mark(n, kUnreachable);
    std::vector<BranchId> stack;
    for (std::uint32_t src = 0; src < n; ++src) {
      std::uint64_t sum = 0;
      stack.assign(1, src);
      mark[src] = src;
      while (!stack.empty()) {
        BranchId b = stack.back();
        stack.pop_back();
        sum += branches[b].local_labels;
        for (BranchId s : successors[b]) {
          if (mark[s] != src) {
            mark[s] = src;
            stack.push_back(s);
          }
        }
      }
      reachable_table_[src] = static_cast<std::uint32_t>(sum);
    }
  }

  std::vector<std::int32_t> group_of_;
  std::vector<std::uint32_t> depth_;
  std::uint32_t max_depth_ = 0;
  std::vector<std::uint32_t> reachable_table_;
};

inline const std::vector<std::uint32_t>& reachable_label_table(const ProgramModel& m) {
  return m.reachable_label_table();
}

// Labels that plain fuzzing cannot reach: on or behind a hard branch, off any
// easy-only walk from the entry.
inline std::uint32_t guarded_label_count(const ProgramModel& m) {
  std::vector<std::uint8_t> easy_reached(m.branch_count(), 0);
  std::vector<BranchId> queue;
  if (!m.branches[m.entry].is_hard()) {
    easy_reached[m.entry] = 1;
    queue.push_back(m.entry);
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (BranchId s : m.successors[queue[head]]) {
      if (easy_reached[s] || m.branches[s].is_hard()) continue;
      easy_reached[s] = 1;
      queue.push_back(s);
    }
  }
  std::uint32_t guarded = 0;
  for (BranchId b = 0; b < m.branch_count(); ++b)
    if (!easy_reached[b]) guarded += m.branches[b].local_labels;
  return guarded;
}

namespace detail {

// Conditional sites laid out as a tree: each site hangs off one arm of an
// earlier site, and every arm of a site is entered through the same edge set.
struct Site {
  std::vector<BranchId> arms;
};

inline std::vector<Site> partition_into_sites(const GenParams& p, Rng& rng,
                                              std::vector<ConditionalGroup>& groups_out) {
  std::vector<Site> sites;
  sites.push_back({{0}});  // entry sits alone
  std::uint32_t next = 1;
  const std::uint32_t n = p.branch_count;
  while (next < n) {
    std::uint32_t remaining = n - next;
    if (remaining >= p.group_size_min) {
      std::uint32_t hi = std::min(p.group_size_max, remaining);
      std::uint32_t g = static_cast<std::uint32_t>(rng.range(p.group_size_min, hi));
      Site s;
      for (std::uint32_t i = 0; i < g; ++i) s.arms.push_back(next++);
      groups_out.push_back({s.arms});
      sites.push_back(std::move(s));
    } else {
      // leftover branches become ungrouped single-arm sites
      sites.push_back({{next++}});
    }
  }
  return sites;
}

}  // namespace detail

// Pure function of (params, rng_seed): identical inputs produce bit-identical
// models.
inline ProgramModel generate_program(const GenParams& p, std::uint64_t rng_seed,
                                     std::string name = {}) {
  if (p.branch_count < 4) throw std::invalid_argument("branch_count must be >= 4");
  if (p.group_size_min < 2 || p.group_size_max < p.group_size_min)
    throw std::invalid_argument("invalid group size range");
  if (p.hard_fraction < 0.0 || p.hard_fraction > 1.0)
    throw std::invalid_argument("hard_fraction must be in [0, 1]");
  if (p.label_density < 0.0 || p.label_density > 1.0)
    throw std::invalid_argument("label_density must be in [0, 1]");
  if (p.magic_width_min < 1 || p.magic_width_max > 63 || p.magic_width_max < p.magic_width_min)
    throw std::invalid_argument("invalid magic width range");

  Rng rng(splitmix64(rng_seed));
  ProgramModel m;
  m.name = name.empty() ? "gen-" + std::to_string(rng_seed) : std::move(name);
  m.gen_seed = rng_seed;
  m.params = p;
  m.branches.assign(p.branch_count, BranchAnnotation{});
  m.successors.assign(p.branch_count, {});
  m.entry = 0;

  auto sites = detail::partition_into_sites(p, rng, m.groups);

  // Attach each site below an arm of an earlier site.
  std::vector<std::uint32_t> site_depth(sites.size(), 0);
  for (std::size_t k = 1; k < sites.size(); ++k) {
    std::size_t parent_site =
        (rng.chance(p.chain_bias)) ? k - 1 : static_cast<std::size_t>(rng.index(k));
    const auto& arms = sites[parent_site].arms;
    BranchId attach = arms[rng.index(arms.size())];
    for (BranchId arm : sites[k].arms) m.successors[attach].push_back(arm);
    site_depth[k] = site_depth[parent_site] + 1;
  }

  // Depth per branch (arms share their site's depth).
  std::vector<std::uint32_t> branch_depth(p.branch_count, 0);
  std::uint32_t deepest = 0;
  for (std::size_t k = 0; k < sites.size(); ++k) {
    for (BranchId arm : sites[k].arms) branch_depth[arm] = site_depth[k];
    deepest = std::max(deepest, site_depth[k]);
  }

  // Hard branches. Entry is never hard (it is always taken). A hard branch
  // with no siblings can never be solved by the concolic executor, and a
  // group with every arm hard blocks the fuzzer outright, so selection
  // prefers grouped arms whose group keeps at least one easy arm; the
  // remaining passes relax that only when the requested fraction demands it.
  const std::uint32_t want_hard = static_cast<std::uint32_t>(
      std::min<double>(std::llround(p.hard_fraction * p.branch_count),
                       p.branch_count > 0 ? p.branch_count - 1 : 0));
  std::vector<std::int32_t> group_index(p.branch_count, -1);
  for (std::size_t g = 0; g < m.groups.size(); ++g)
    for (BranchId b : m.groups[g].members) group_index[b] = static_cast<std::int32_t>(g);
  std::vector<std::uint32_t> easy_left(m.groups.size());
  for (std::size_t g = 0; g < m.groups.size(); ++g)
    easy_left[g] = static_cast<std::uint32_t>(m.groups[g].members.size());

  std::vector<BranchId> order;
  for (BranchId b = 1; b < p.branch_count; ++b) order.push_back(b);
  if (p.hard_placement == HardPlacement::kGateway) {
    // Prefer arms guarding the most downstream branches so hardness gates
    // real exploration mass. Ids grow along edges, so one reverse pass works.
    std::vector<std::uint32_t> below(p.branch_count, 0);
    for (BranchId b = p.branch_count; b-- > 0;) {
      std::uint32_t total = 0;
      for (BranchId s : m.successors[b]) total += 1 + below[s];
      below[b] = total;
    }
    auto gate_score = [&](BranchId b) -> std::uint32_t {
      if (p.gateway_max_mass > 0 && below[b] > p.gateway_max_mass) return 0;
      return below[b];
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](BranchId a, BranchId b) { return gate_score(a) > gate_score(b); });
    if (p.hard_gateway_cap > 0 && p.hard_gateway_cap < order.size()) {
      // true gates up front, the rest of the quota lands anywhere
      for (std::size_t i = order.size(); i > p.hard_gateway_cap + 1; --i) {
        std::size_t j = p.hard_gateway_cap + rng.index(i - p.hard_gateway_cap);
        std::swap(order[i - 1], order[j]);
      }
    }
  } else {
    for (std::size_t i = order.size(); i > 1; --i)  // Fisher-Yates
      std::swap(order[i - 1], order[rng.index(i)]);
  }
  std::uint32_t marked = 0;
  for (int pass = 0; pass < 3 && marked < want_hard; ++pass) {
    for (BranchId b : order) {
      if (marked >= want_hard) break;
      if (m.branches[b].is_hard()) continue;
      std::int32_t g = group_index[b];
      if (pass == 0 && (g < 0 || easy_left[g] <= 1)) continue;
      if (pass == 1 && g < 0) continue;
      m.branches[b].magic_width =
          static_cast<std::uint8_t>(rng.range(p.magic_width_min, p.magic_width_max));
      if (g >= 0) --easy_left[g];
      ++marked;
    }
  }

  // Sanitizer labels.
  std::vector<bool> hard_guarded(p.branch_count, false);
  if (p.label_placement == LabelPlacement::kHardGuarded) {
    // A branch is hard-guarded when some path position strictly above it is a
    // hard arm: propagate along edges (ids increase along edges by construction).
    for (BranchId b = 0; b < p.branch_count; ++b) {
      bool below_hard = hard_guarded[b] || m.branches[b].is_hard();
      if (!below_hard) continue;
      for (BranchId s : m.successors[b]) hard_guarded[s] = true;
    }
  }
  for (BranchId b = 0; b < p.branch_count; ++b) {
    bool eligible = true;
    switch (p.label_placement) {
      case LabelPlacement::kUniform:
        break;
      case LabelPlacement::kHardGuarded:
        eligible = hard_guarded[b] || m.branches[b].is_hard();
        break;
      case LabelPlacement::kDeep:
        eligible = deepest > 0 && branch_depth[b] * 2 >= deepest;  // deepest half
        break;
    }
    bool draw = rng.chance(p.label_density);  // always drawn: stable stream layout
    if (eligible && draw && p.local_label_max > 0)
      m.branches[b].local_labels = static_cast<std::uint32_t>(rng.range(1, p.local_label_max));
  }

  // Remaining annotations.
  for (BranchId b = 0; b < p.branch_count; ++b) {
    auto& a = m.branches[b];
    a.cmp_count = static_cast<std::uint32_t>(rng.range(0, p.cmp_max));
    a.external_calls = static_cast<std::uint32_t>(rng.range(0, p.external_max));
    a.indirect_calls = static_cast<std::uint32_t>(rng.range(0, p.indirect_max));
    if (b != m.entry && p.loop_iters_max > 0 && rng.chance(p.loop_fraction))
      a.loop_max = static_cast<std::uint8_t>(p.loop_iters_max);
  }

  m.finalize();
  return m;
}

// ---------------------------------------------------------------------------
// Serialization: versioned, human-readable JSON.

inline constexpr const char* kProgramFormat = "seedsched-program";
inline constexpr int kProgramVersion = 1;

inline nlohmann::json params_to_json(const GenParams& p) {
  return nlohmann::json{{"branch_count", p.branch_count},
                        {"group_size_min", p.group_size_min},
                        {"group_size_max", p.group_size_max},
                        {"hard_fraction", p.hard_fraction},
                        {"label_density", p.label_density},
                        {"cmp_max", p.cmp_max},
                        {"external_max", p.external_max},
                        {"indirect_max", p.indirect_max},
                        {"local_label_max", p.local_label_max},
                        {"magic_width_min", p.magic_width_min},
                        {"magic_width_max", p.magic_width_max},
                        {"chain_bias", p.chain_bias},
                        {"label_placement", static_cast<int>(p.label_placement)},
                        {"hard_placement", static_cast<int>(p.hard_placement)},
                        {"hard_gateway_cap", p.hard_gateway_cap},
                        {"gateway_max_mass", p.gateway_max_mass},
                        {"loop_fraction", p.loop_fraction},
                        {"loop_iters_max", p.loop_iters_max},
                        {"size_base", p.size_base},
                        {"size_per_branch", p.size_per_branch},
                        {"size_jitter", p.size_jitter}};
}

inline GenParams params_from_json(const nlohmann::json& j) {
  GenParams p;
  p.branch_count = j.at("branch_count");
  p.group_size_min = j.at("group_size_min");
  p.group_size_max = j.at("group_size_max");
  p.hard_fraction = j.at("hard_fraction");
  p.label_density = j.at("label_density");
  p.cmp_max = j.at("cmp_max");
  p.external_max = j.at("external_max");
  p.indirect_max = j.at("indirect_max");
  p.local_label_max = j.at("local_label_max");
  p.magic_width_min = j.at("magic_width_min");
  p.magic_width_max = j.at("magic_width_max");
  p.chain_bias = j.at("chain_bias");
  p.label_placement = static_cast<LabelPlacement>(j.at("label_placement").get<int>());
  p.hard_placement = static_cast<HardPlacement>(j.at("hard_placement").get<int>());
  p.hard_gateway_cap = j.at("hard_gateway_cap");
  p.gateway_max_mass = j.at("gateway_max_mass");
  p.loop_fraction = j.at("loop_fraction");
  p.loop_iters_max = j.at("loop_iters_max");
  p.size_base = j.at("size_base");
  p.size_per_branch = j.at("size_per_branch");
  p.size_jitter = j.at("size_jitter");
  return p;
}

inline nlohmann::json program_to_json(const ProgramModel& m) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& a : m.branches) {
    branches.push_back({{"reachable_labels", a.reachable_labels},
                        {"local_labels", a.local_labels},
                        {"cmp_count", a.cmp_count},
                        {"external_calls", a.external_calls},
                        {"indirect_calls", a.indirect_calls},
                        {"magic_width", a.magic_width},
                        {"loop_max", a.loop_max}});
  }
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : m.groups) groups.push_back(g.members);
  return nlohmann::json{{"format", kProgramFormat}, {"version", kProgramVersion},
                        {"name", m.name},           {"gen_seed", m.gen_seed},
                        {"params", params_to_json(m.params)},
                        {"entry", m.entry},         {"branches", branches},
                        {"groups", groups},         {"successors", m.successors}};
}

inline void save_program(const ProgramModel& m, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << program_to_json(m).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline ProgramModel program_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != kProgramFormat)
    throw std::runtime_error("not a program model file");
  if (j.at("version").get<int>() != kProgramVersion)
    throw std::runtime_error("unsupported program file version");
  ProgramModel m;
  m.name = j.at("name").get<std::string>();
  m.gen_seed = j.at("gen_seed");
  m.params = params_from_json(j.at("params"));
  m.entry = j.at("entry");
  for (const auto& jb : j.at("branches")) {
    BranchAnnotation a;
    a.reachable_labels = jb.at("reachable_labels");
    a.local_labels = jb.at("local_labels");
    a.cmp_count = jb.at("cmp_count");
    a.external_calls = jb.at("external_calls");
    a.indirect_calls = jb.at("indirect_calls");
    a.magic_width = static_cast<std::uint8_t>(jb.at("magic_width").get<unsigned>());
    a.loop_max = static_cast<std::uint8_t>(jb.at("loop_max").get<unsigned>());
    m.branches.push_back(a);
  }
  for (const auto& jg : j.at("groups")) m.groups.push_back({jg.get<std::vector<BranchId>>()});
  m.successors = j.at("successors").get<std::vector<std::vector<BranchId>>>();
  std::vector<std::uint32_t> stored;
  for (const auto& a : m.branches) stored.push_back(a.reachable_labels);
  m.finalize();
  for (std::size_t b = 0; b < stored.size(); ++b)
    if (stored[b] != m.branches[b].reachable_labels)
      throw std::runtime_error("program file inconsistent: stored reachable_labels differ");
  return m;
}

inline ProgramModel load_program(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open program file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed program file " + path.string() + ": " + e.what());
  }
  return program_from_json(j);
}

}  // namespace seedsched
