#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <deque>
#include <unordered_set>
#include <vector>

#include "seedsched/coordinator.hpp"
#include "seedsched/coverage.hpp"
#include "seedsched/csv.hpp"
#include "seedsched/lineage.hpp"
#include "seedsched/program_model.hpp"
#include "seedsched/rng.hpp"
#include "seedsched/seed.hpp"

// Deterministic discrete-time simulation of the hybrid fuzzing loop: a
// GA-style fuzzer, a budgeted concolic executor and the campaign driver.
// One tick is one fuzzing epoch. The cost model is harness ground truth; its
// one design requirement is that the utility features genuinely predict
// descendant-tree size, so the learning claim is testable.

namespace seedsched {

struct CostModel {
  double p_easy = 0.2;    // per decision: chance a mutation flips to an easy sibling
  double p_ext = 0.3;     // per external call: chance it voids a solve
  double p_favor = 0.8;   // chance the fuzzer picks a recently-interesting seed to mutate
  Tick favor_recency = 8; // how long a new-coverage seed stays on the favored list
};

struct CampaignConfig {
  std::shared_ptr<const ProgramModel> program;
  PolicyKind policy = PolicyKind::kRandom;
  std::uint32_t ticks = 200;
  std::uint32_t fuzzer_epoch = 100;    // mutations per tick
  std::uint32_t concolic_budget = 60;  // branch-solve units per dispatch
  Tick label_window = 5;
  std::uint32_t dispatch_k = 1;
  std::uint64_t rng_seed = 1;
  std::vector<std::string> initial_seeds = {"random", "random", "random"};
  CostModel cost;
  double lambda = 1.0;
  int refit_batch = 16;
  ForestParams forest;
  std::optional<ModelBundle> initial_model;
  std::uint32_t repetition = 0;

  void validate() const {
    if (!program) throw std::invalid_argument("campaign needs a program model");
    if (ticks != 0 && ticks <= label_window)
      throw std::invalid_argument("ticks must exceed the label window");
    if (fuzzer_epoch == 0 || concolic_budget == 0 || dispatch_k == 0)
      throw std::invalid_argument("campaign counts must be positive");
    if (initial_seeds.empty()) throw std::invalid_argument("campaign needs initial seeds");
  }
};

struct CampaignStats {
  std::string program;
  PolicyKind policy = PolicyKind::kRandom;
  std::uint32_t repetition = 0;
  std::uint64_t rng_seed = 0;

  std::uint32_t initial_covered = 0;
  std::vector<std::uint32_t> covered_per_tick;
  std::vector<DispatchRecord> dispatch_log;
  std::vector<LabeledRow> training_rows;
  StageTimers timers;
  std::vector<TimingSnapshot> timing_log;
  std::optional<ModelBundle> final_model;
  std::uint32_t final_queue_size = 0;
  std::uint32_t dispatch_count = 0;
  std::uint32_t matured_count = 0;
  std::uint32_t pending_count = 0;
  std::uint64_t ignored_feedback = 0;

  std::uint32_t final_coverage() const {
    return covered_per_tick.empty() ? initial_covered : covered_per_tick.back();
  }
};

// Mutable per-campaign world: the queue arena, coverage, lineage and the rng.
class CampaignState {
 public:
  CampaignState(std::shared_ptr<const ProgramModel> model, std::uint64_t rng_seed,
                const CostModel& cost)
      : model_(std::move(model)), coverage_(*model_), rng_(mix_seed(rng_seed, hash_str("campaign"))),
        cost_(cost) {}

  const ProgramModel& model() const { return *model_; }
  CoverageStore& coverage() { return coverage_; }
  const CoverageStore& coverage() const { return coverage_; }
  LineageIndex& lineage() { return lineage_; }
  const LineageIndex& lineage() const { return lineage_; }
  Rng& rng() { return rng_; }
  const CostModel& cost() const { return cost_; }
  const std::vector<Seed>& queue() const { return seeds_; }
  const Seed& seed(SeedId id) const { return seeds_[id]; }
  Tick now = 0;

  // AFL-style admission: a mutant enters the queue when it covers a new
  // branch (first_new_cov) or at least exercises a path never seen before
  // (the hit-count-novelty analogue).
  std::optional<SeedId> admit(std::vector<BranchId> trace, SeedOrigin origin,
                              std::optional<SeedId> parent,
                              std::optional<std::uint32_t> size_override = std::nullopt) {
    const std::uint32_t newly = coverage_.mark_covered(trace);
    const bool fresh_path = path_hashes_.insert(hash_trace(trace)).second;
    if (newly == 0 && !fresh_path) return std::nullopt;

    Seed s;
    s.id = static_cast<SeedId>(seeds_.size());
    s.parent = parent;
    s.origin = origin;
    s.trace = std::move(trace);
    s.first_new_cov = newly > 0;
    s.created_at = now;
    s.size = size_override ? *size_override : synth_size(s.trace);
    lineage_.record_seed(s);
    if (s.first_new_cov) favored_.push_back(s.id);
    seeds_.push_back(std::move(s));
    return seeds_.back().id;
  }

  // Pick a parent for the next mutation. AFL-style: recent new-coverage
  // seeds soak up most of the mutation effort while they are fresh.
  const Seed& pick_parent() {
    while (!favored_.empty() &&
           seeds_[favored_.front()].created_at + cost_.favor_recency < now)
      favored_.pop_front();
    if (!favored_.empty() && rng_.chance(cost_.p_favor))
      return seeds_[favored_[rng_.index(favored_.size())]];
    return seeds_[rng_.index(seeds_.size())];
  }

 private:
  std::uint32_t synth_size(const std::vector<BranchId>& trace) {
    const auto& p = model_->params;
    const std::int64_t jitter =
        p.size_jitter ? rng_.range(-static_cast<std::int64_t>(p.size_jitter),
                                   static_cast<std::int64_t>(p.size_jitter))
                      : 0;
    const std::int64_t size = static_cast<std::int64_t>(p.size_base) +
                              static_cast<std::int64_t>(p.size_per_branch) *
                                  static_cast<std::int64_t>(trace.size()) +
                              jitter;
    return static_cast<std::uint32_t>(std::max<std::int64_t>(1, size));
  }

  static std::uint64_t hash_trace(const std::vector<BranchId>& trace) {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (BranchId b : trace) h = splitmix64(h ^ b);
    return h;
  }

  std::shared_ptr<const ProgramModel> model_;
  CoverageStore coverage_;
  LineageIndex lineage_;
  Rng rng_;
  CostModel cost_;
  std::vector<Seed> seeds_;
  std::deque<SeedId> favored_;
  std::unordered_set<std::uint64_t> path_hashes_;
};

namespace detail {

inline double hard_flip_prob(const BranchAnnotation& a) {
  return std::exp2(-static_cast<double>(a.magic_width));
}

// Loop heads execute 1..(1+loop_max) times per pass; the iteration count is
// part of the path, so loop variants are distinct traces with equal coverage.
inline std::uint32_t roll_iterations(const BranchAnnotation& a, Rng& rng) {
  return a.loop_max ? 1 + static_cast<std::uint32_t>(rng.range(0, a.loop_max)) : 1;
}

inline void emit(BranchId b, std::uint32_t times, std::vector<BranchId>& out) {
  for (std::uint32_t i = 0; i < times; ++i) out.push_back(b);
}

// Walk onward from `cur`, choosing arms uniformly; hard arms pass only their
// magic roll, otherwise an easy arm is taken. Stops when a site offers no
// passable arm. Length is capped to survive crafted cyclic graphs.
inline void explore_walk(const ProgramModel& m, BranchId cur, std::vector<BranchId>& out,
                         Rng& rng) {
  const std::size_t cap = 8 * m.branch_count() + 64;
  while (out.size() < cap) {
    const auto& options = m.successors[cur];
    if (options.empty()) return;
    BranchId pick = options[rng.index(options.size())];
    if (m.branches[pick].is_hard() && !rng.chance(hard_flip_prob(m.branches[pick]))) {
      BranchId easy = pick;
      std::size_t n_easy = 0;
      for (BranchId s : options)
        if (!m.branches[s].is_hard() && ++n_easy && rng.index(n_easy) == 0) easy = s;
      if (n_easy == 0) return;  // every arm is a magic check
      pick = easy;
    }
    emit(pick, roll_iterations(m.branches[pick], rng), out);
    cur = pick;
  }
}

struct Run {
  BranchId branch;
  std::uint32_t times;
};

inline std::vector<Run> compress_runs(const std::vector<BranchId>& trace) {
  std::vector<Run> runs;
  for (BranchId b : trace) {
    if (!runs.empty() && runs.back().branch == b)
      ++runs.back().times;
    else
      runs.push_back({b, 1});
  }
  return runs;
}

}  // namespace detail

// The straight-line "does nothing interesting" input: always takes the
// lowest-numbered easy arm, loops run once.
inline std::vector<BranchId> naive_trace(const ProgramModel& m) {
  std::vector<BranchId> out{m.entry};
  BranchId cur = m.entry;
  const std::size_t cap = 4 * m.branch_count() + 8;
  while (out.size() < cap) {
    const auto& options = m.successors[cur];
    BranchId next = m.entry;
    bool found = false;
    for (BranchId s : options)
      if (!m.branches[s].is_hard() && (!found || s < next)) {
        next = s;
        found = true;
      }
    if (!found) return out;
    out.push_back(next);
    cur = next;
  }
  return out;
}

inline std::vector<BranchId> random_trace(const ProgramModel& m, Rng& rng) {
  std::vector<BranchId> out{m.entry};
  detail::explore_walk(m, m.entry, out, rng);
  return out;
}

// One mutation of a parent trace. At each decision along the parent path an
// easy sibling is taken with probability p_easy and a hard sibling with
// probability 2^-magic_width; loop iteration counts re-roll with the same
// p_easy; past the divergence point the walk explores fresh territory.
inline std::vector<BranchId> mutate_trace(const ProgramModel& m,
                                          const std::vector<BranchId>& parent, Rng& rng,
                                          double p_easy) {
  const auto runs = detail::compress_runs(parent);
  std::vector<BranchId> out{m.entry};
  BranchId cur = m.entry;
  std::size_t pos = 0;  // index of cur's run while aligned
  bool aligned = !runs.empty() && runs[0].branch == m.entry;
  const std::size_t cap = 8 * m.branch_count() + 64;
  while (out.size() < cap) {
    const auto& options = m.successors[cur];
    if (options.empty()) return out;

    std::optional<BranchId> intended;
    if (aligned && pos + 1 < runs.size()) {
      for (BranchId s : options)
        if (s == runs[pos + 1].branch) {
          intended = s;
          break;
        }
    }

    std::optional<BranchId> next;
    for (BranchId s : options) {  // magic-value lottery
      if (!m.branches[s].is_hard() || (intended && s == *intended)) continue;
      if (rng.chance(detail::hard_flip_prob(m.branches[s]))) {
        next = s;
        break;
      }
    }
    if (!next && rng.chance(p_easy)) {
      BranchId easy = cur;
      std::size_t n_easy = 0;
      for (BranchId s : options) {
        if (m.branches[s].is_hard() || (intended && s == *intended)) continue;
        if (++n_easy && rng.index(n_easy) == 0) easy = s;
      }
      if (n_easy > 0) next = easy;
    }
    if (!next) {
      if (intended) {
        next = intended;
      } else {
        BranchId pick = options[rng.index(options.size())];
        if (m.branches[pick].is_hard() && !rng.chance(detail::hard_flip_prob(m.branches[pick]))) {
          BranchId easy = pick;
          std::size_t n_easy = 0;
          for (BranchId s : options)
            if (!m.branches[s].is_hard() && ++n_easy && rng.index(n_easy) == 0) easy = s;
          if (n_easy == 0) return out;
          pick = easy;
        }
        next = pick;
      }
    }

    const bool follows_parent = aligned && pos + 1 < runs.size() && *next == runs[pos + 1].branch;
    std::uint32_t times;
    if (follows_parent) {
      ++pos;
      times = runs[pos].times;  // keep the parent's iteration count...
      if (m.branches[*next].loop_max && rng.chance(p_easy))
        times = detail::roll_iterations(m.branches[*next], rng);  // ...unless mutated
    } else {
      aligned = false;
      times = detail::roll_iterations(m.branches[*next], rng);
    }
    detail::emit(*next, times, out);
    cur = *next;
  }
  return out;
}

// Runs one fuzzing epoch: `mutations` children derived from queue seeds,
// admitted when interesting. Returns the admitted ids.
inline std::vector<SeedId> fuzzer_epoch_step(CampaignState& state, std::uint32_t mutations,
                                             double p_easy) {
  std::vector<SeedId> admitted;
  for (std::uint32_t i = 0; i < mutations; ++i) {
    const Seed& parent = state.pick_parent();
    const SeedId parent_id = parent.id;  // admit() may grow the arena
    auto trace = mutate_trace(state.model(), parent.trace, state.rng(), p_easy);
    if (auto id = state.admit(std::move(trace), SeedOrigin::kFuzzerMutation, parent_id))
      admitted.push_back(*id);
  }
  return admitted;
}

struct ConcolicChild {
  std::vector<BranchId> trace;
  BranchId solved = 0;
};

// Replays the seed's path and solves branch conditions toward uncovered
// sibling arms. Each solve costs (1 + cmp_count) units; indirect calls on the
// path shrink the whole budget; external calls can void individual solves.
inline std::vector<ConcolicChild> concolic_step(const Seed& seed, const ProgramModel& m,
                                                const CoverageStore& coverage,
                                                std::uint32_t budget, Rng& rng,
                                                const CostModel& cost) {
  if (budget == 0) throw std::invalid_argument("concolic budget must be positive");
  std::uint64_t total_indirect = 0;
  for (BranchId b : seed.trace) total_indirect += m.branches[b].indirect_calls;
  const std::uint64_t effective = budget / (1 + total_indirect);  // state-explosion penalty

  std::vector<ConcolicChild> children;
  std::unordered_set<BranchId> solved;
  std::uint64_t spent = 0;
  for (std::size_t pos = 0; pos < seed.trace.size(); ++pos) {
    const BranchId b = seed.trace[pos];
    if (m.group_of(b) < 0) continue;
    BranchId target = 0;
    bool found = false;
    for (BranchId sib : m.group_members(b)) {
      if (sib == b || coverage.covered(sib) || solved.count(sib)) continue;
      target = sib;  // members are sorted: lowest uncovered sibling
      found = true;
      break;
    }
    if (!found) continue;

    const std::uint64_t solve_cost = 1 + m.branches[b].cmp_count;
    if (spent + solve_cost > effective) break;  // out of solver time
    spent += solve_cost;

    bool voided = false;
    for (std::uint32_t e = 0; e < m.branches[b].external_calls && !voided; ++e)
      voided = rng.chance(cost.p_ext);
    if (voided) continue;  // budget burned, seed wrong

    ConcolicChild child;
    child.trace.assign(seed.trace.begin(), seed.trace.begin() + static_cast<std::ptrdiff_t>(pos));
    child.trace.push_back(target);
    detail::explore_walk(m, target, child.trace, rng);
    child.solved = target;
    solved.insert(target);
    children.push_back(std::move(child));
  }
  return children;
}

inline CampaignStats run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  CampaignState state(cfg.program, cfg.rng_seed, cfg.cost);
  Coordinator coordinator({cfg.policy, mix_seed(cfg.rng_seed, hash_str("policy"))},
                          {cfg.label_window, cfg.refit_batch, cfg.lambda, cfg.forest},
                          cfg.initial_model);

  for (const auto& token : cfg.initial_seeds) {
    if (token == "naive") {
      state.admit(naive_trace(state.model()), SeedOrigin::kInitial, std::nullopt, 4);
    } else if (token == "random") {
      state.admit(random_trace(state.model(), state.rng()), SeedOrigin::kInitial, std::nullopt);
    } else {
      throw std::invalid_argument("unknown initial seed token: " + token);
    }
  }
  if (state.queue().empty())
    state.admit({state.model().entry}, SeedOrigin::kInitial, std::nullopt, 4);

  CampaignStats stats;
  stats.program = state.model().name;
  stats.policy = cfg.policy;
  stats.repetition = cfg.repetition;
  stats.rng_seed = cfg.rng_seed;
  stats.initial_covered = state.coverage().covered_count();

  for (Tick t = 0; t < cfg.ticks; ++t) {
    state.now = t;
    fuzzer_epoch_step(state, cfg.fuzzer_epoch, cfg.cost.p_easy);

    auto matured = coordinator.mature(state.lineage(), t);
    coordinator.feedback(matured);

    FuzzerStateView view{static_cast<std::uint32_t>(state.queue().size()), &state.coverage()};
    auto dispatched =
        coordinator.dispatch(state.queue(), cfg.dispatch_k, state.model(), view, t, state.lineage());
    for (const auto& rec : dispatched) {
      auto children = concolic_step(state.seed(rec.seed), state.model(), state.coverage(),
                                    cfg.concolic_budget, state.rng(), cfg.cost);
      for (auto& child : children)
        state.admit(std::move(child.trace), SeedOrigin::kConcolicImport, rec.seed);
    }

    stats.covered_per_tick.push_back(state.coverage().covered_count());
  }

  stats.dispatch_log = coordinator.records();
  stats.training_rows = coordinator.training_rows();
  stats.timers = coordinator.timers();
  stats.timing_log = coordinator.timing_log();
  stats.final_queue_size = static_cast<std::uint32_t>(state.queue().size());
  stats.dispatch_count = static_cast<std::uint32_t>(coordinator.records().size());
  stats.matured_count = static_cast<std::uint32_t>(coordinator.training_rows().size());
  stats.pending_count = static_cast<std::uint32_t>(coordinator.pending().size());
  stats.ignored_feedback = coordinator.ignored_feedback();
  if (is_learning_policy(cfg.policy)) stats.final_model = coordinator.bundle("training.csv");
  return stats;
}

// ---------------------------------------------------------------------------
// Artifact writers. The stats CSV contains only deterministic fields, so a
// re-run with an identical config is byte-identical; wall-clock timings go to
// the summary instead.

inline void write_stats_csv(const CampaignStats& s, std::ostream& out, bool header = true) {
  if (header) out << "tick,policy,program,repetition,covered\n";
  for (std::size_t t = 0; t < s.covered_per_tick.size(); ++t)
    out << t << ',' << to_string(s.policy) << ',' << s.program << ',' << s.repetition << ','
        << s.covered_per_tick[t] << '\n';
}

inline void write_stats_csv(const CampaignStats& s, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_stats_csv(s, out);
}

inline void write_dispatch_csv(const CampaignStats& s, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "tick,seed,policy,score,label\n";
  for (const auto& r : s.dispatch_log) {
    out << r.tick << ',' << r.seed << ',' << to_string(s.policy) << ','
        << format_double(r.predicted_utility) << ',';
    if (r.label) out << format_double(*r.label);
    out << '\n';
  }
}

inline void write_training_csv(const CampaignStats& s, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << kFeatureCsvHeader << ",label,tick\n";
  for (const auto& row : s.training_rows)
    out << to_csv_row(row.features) << ',' << format_double(row.label) << ',' << row.tick << '\n';
}

inline void write_summary(const CampaignStats& s, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "program: " << s.program << '\n'
      << "policy: " << to_string(s.policy) << '\n'
      << "repetition: " << s.repetition << '\n'
      << "rng_seed: " << s.rng_seed << '\n'
      << "final_coverage: " << s.final_coverage() << '\n'
      << "final_queue_size: " << s.final_queue_size << '\n'
      << "dispatches: " << s.dispatch_count << '\n'
      << "matured_labels: " << s.matured_count << '\n'
      << "pending_labels: " << s.pending_count << '\n'
      << "mean_feature_extraction_ns: " << format_double(s.timers.mean_feature_ns()) << '\n'
      << "mean_prediction_ns: " << format_double(s.timers.mean_predict_ns()) << '\n'
      << "mean_online_update_ns: " << format_double(s.timers.mean_online_update_ns()) << '\n'
      << "mean_offline_refit_ns: " << format_double(s.timers.mean_refit_ns()) << '\n';
}

}  // namespace seedsched
