#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seedsched/features.hpp"
#include "seedsched/lineage.hpp"
#include "seedsched/model_bundle.hpp"
#include "seedsched/rng.hpp"
#include "seedsched/seed.hpp"

// The scheduling brain: ranks the fuzzer queue by predicted utility, sends
// the top seeds to the concolic executor, registers a pending label for each
// dispatch, and feeds matured labels back into the models.

namespace seedsched {

enum class PolicyKind : std::uint8_t { kRandom, kHeuristicAfl, kMeuzzOl, kMeuzzRf, kMeuzzEn };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kHeuristicAfl: return "afl";
    case PolicyKind::kMeuzzOl: return "meuzz-ol";
    case PolicyKind::kMeuzzRf: return "meuzz-rf";
    case PolicyKind::kMeuzzEn: return "meuzz-en";
  }
  return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
  if (s == "random") return PolicyKind::kRandom;
  if (s == "afl") return PolicyKind::kHeuristicAfl;
  if (s == "meuzz-ol") return PolicyKind::kMeuzzOl;
  if (s == "meuzz-rf") return PolicyKind::kMeuzzRf;
  if (s == "meuzz-en") return PolicyKind::kMeuzzEn;
  throw std::invalid_argument("unknown policy: " + s +
                              " (expected random|afl|meuzz-ol|meuzz-rf|meuzz-en)");
}

inline bool is_learning_policy(PolicyKind k) {
  return k == PolicyKind::kMeuzzOl || k == PolicyKind::kMeuzzRf || k == PolicyKind::kMeuzzEn;
}

struct SchedulerPolicy {
  PolicyKind kind = PolicyKind::kRandom;
  std::uint64_t rng_seed = 0;
};

struct CoordinatorConfig {
  Tick label_window = 5;
  int refit_batch = 16;  // matured labels between forest refits
  double lambda = 1.0;
  ForestParams forest;
};

struct DispatchRecord {
  SeedId seed = 0;
  double predicted_utility = 0.0;
  Tick tick = 0;
  FeatureVector features;
  std::optional<double> label;  // filled when the pending label matures
};

struct StageTimers {
  std::uint64_t feature_ns = 0, feature_n = 0;
  std::uint64_t predict_ns = 0, predict_n = 0;
  std::uint64_t online_update_ns = 0, online_update_n = 0;
  std::uint64_t refit_ns = 0, refit_n = 0;

  static double mean(std::uint64_t ns, std::uint64_t n) {
    return n ? static_cast<double>(ns) / static_cast<double>(n) : 0.0;
  }
  double mean_feature_ns() const { return mean(feature_ns, feature_n); }
  double mean_predict_ns() const { return mean(predict_ns, predict_n); }
  double mean_online_update_ns() const { return mean(online_update_ns, online_update_n); }
  double mean_refit_ns() const { return mean(refit_ns, refit_n); }
};

// Snapshot taken at every offline refit.
struct TimingSnapshot {
  std::uint64_t at_refit = 0;
  double online_update_mean_ns = 0.0;
  double refit_mean_ns = 0.0;
};

struct LabeledRow {
  FeatureVector features;
  double label = 0.0;
  Tick tick = 0;
};

namespace detail {

class StageTimer {
 public:
  StageTimer(std::uint64_t& ns, std::uint64_t& n) : ns_(ns), n_(n) {
    t0_ = std::chrono::steady_clock::now();
  }
  ~StageTimer() {
    ns_ += static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                          std::chrono::steady_clock::now() - t0_)
                                          .count());
    ++n_;
  }

 private:
  std::uint64_t& ns_;
  std::uint64_t& n_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

class Coordinator {
 public:
  Coordinator(SchedulerPolicy policy, CoordinatorConfig cfg,
              std::optional<ModelBundle> initial = std::nullopt)
      : policy_(policy), cfg_(cfg) {
    switch (policy.kind) {
      case PolicyKind::kMeuzzOl:
        ol_ = OnlineLinearModel::init(FeatureVector::kDim, cfg.lambda,
                                      mix_seed(policy.rng_seed, hash_str("ol-init")));
        break;
      case PolicyKind::kMeuzzRf:
        rf_ = RandomForestModel{};
        rf_->params = cfg.forest;
        break;
      case PolicyKind::kMeuzzEn:
        ol_ = OnlineLinearModel::init(FeatureVector::kDim, cfg.lambda,
                                      mix_seed(policy.rng_seed, hash_str("ol-init")));
        rf_ = RandomForestModel{};
        rf_->params = cfg.forest;
        break;
      default:
        break;
    }
    if (initial) {
      // Reuse mode: adopt whichever sub-models the saved bundle provides.
      if (ol_ && initial->ol) ol_ = *initial->ol;
      if (rf_ && initial->rf && initial->rf->fitted()) rf_ = *initial->rf;
    }
  }

  const SchedulerPolicy& policy() const { return policy_; }
  const CoordinatorConfig& config() const { return cfg_; }

  // Score one seed under the current models. Pure between feedback calls.
  double score_seed(const Seed& s, const ProgramModel& model, const FuzzerStateView& state) const {
    switch (policy_.kind) {
      case PolicyKind::kRandom:
        // keyed hash, not a stream draw: re-ranking must not perturb the order
        return static_cast<double>(splitmix64(mix_seed(policy_.rng_seed, s.id)) >> 11) *
               0x1.0p-53;
      case PolicyKind::kHeuristicAfl:
        // lexicographic (first_new_cov desc, size asc) folded into one real
        return (s.first_new_cov ? 1e12 : 0.0) - static_cast<double>(s.size);
      case PolicyKind::kMeuzzOl: {
        const auto f = timed_extract(s, model, state);
        detail::StageTimer t(timers_.predict_ns, timers_.predict_n);
        return ol_->predict(transform_for_linear(f));
      }
      case PolicyKind::kMeuzzRf: {
        const auto f = timed_extract(s, model, state);
        detail::StageTimer t(timers_.predict_ns, timers_.predict_n);
        return rf_->fitted() ? rf_->predict(f.as_vector()) : 0.0;
      }
      case PolicyKind::kMeuzzEn: {
        const auto f = timed_extract(s, model, state);
        detail::StageTimer t(timers_.predict_ns, timers_.predict_n);
        return ensemble_predict(*ol_, *rf_, f).value;
      }
    }
    return 0.0;
  }

  // Descending by score, ties broken by lower seed id.
  std::vector<std::pair<SeedId, double>> rank_queue(const std::vector<Seed>& queue,
                                                    const ProgramModel& model,
                                                    const FuzzerStateView& state) const {
    std::vector<std::pair<SeedId, double>> ranked;
    ranked.reserve(queue.size());
    for (const Seed& s : queue) ranked.emplace_back(s.id, score_seed(s, model, state));
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return ranked;
  }

  bool dispatched(SeedId id) const { return dispatched_.count(id) != 0; }

  // Top-k not-yet-dispatched seeds. Marks them dispatched, registers a
  // pending label carrying the features used for scoring, and marks the seed
  // as a descendant-tree root. An empty eligible set yields an empty list.
  std::vector<DispatchRecord> dispatch(const std::vector<Seed>& queue, std::size_t k,
                                       const ProgramModel& model, const FuzzerStateView& state,
                                       Tick now, LineageIndex& lineage) {
    if (k < 1) throw std::invalid_argument("dispatch requires k >= 1");
    std::vector<Seed> eligible;
    for (const Seed& s : queue)
      if (!dispatched_.count(s.id)) eligible.push_back(s);
    if (eligible.empty()) return {};
    auto ranked = rank_queue(eligible, model, state);

    std::unordered_map<SeedId, const Seed*> by_id;
    for (const Seed& s : eligible) by_id.emplace(s.id, &s);

    std::vector<DispatchRecord> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < k; ++i) {
      const Seed& s = *by_id.at(ranked[i].first);
      DispatchRecord rec;
      rec.seed = s.id;
      rec.predicted_utility = ranked[i].second;
      rec.tick = now;
      rec.features = timed_extract(s, model, state);
      dispatched_.insert(s.id);
      lineage.mark_root(s.id);
      pending_.push_back({s.id, rec.features, now, now + cfg_.label_window});
      record_index_[s.id] = records_.size();
      records_.push_back(rec);
      out.push_back(rec);
    }
    return out;
  }

  // Drains due pending labels (cutoff = now), attaches them to their dispatch
  // records and the training log, and returns the (features, label) pairs in
  // selection order.
  std::vector<std::pair<FeatureVector, double>> mature(const LineageIndex& lineage, Tick now) {
    std::vector<SeedId> due;
    for (const auto& p : pending_)
      if (p.matures_at <= now) due.push_back(p.root);
    auto pairs = mature_labels(pending_, lineage, now);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      records_[record_index_.at(due[i])].label = pairs[i].second;
      training_rows_.push_back({pairs[i].first, pairs[i].second, now});
    }
    return pairs;
  }

  // Model updates; a no-op (counted) for the non-learning policies.
  void feedback(const std::vector<std::pair<FeatureVector, double>>& matured) {
    if (!is_learning_policy(policy_.kind)) {
      ignored_feedback_ += matured.size();
      return;
    }
    for (const auto& [f, y] : matured) {
      if (ol_) {
        detail::StageTimer t(timers_.online_update_ns, timers_.online_update_n);
        ol_->update(transform_for_linear(f), y);
      }
      if (rf_) {
        forest_data_.push_back({f.as_vector(), y});
        ++since_refit_;
      }
    }
    if (rf_ && since_refit_ >= cfg_.refit_batch) {
      {
        detail::StageTimer t(timers_.refit_ns, timers_.refit_n);
        *rf_ = RandomForestModel::fit(forest_data_, cfg_.forest,
                                      mix_seed(policy_.rng_seed, hash_str("refit"), refits_));
      }
      ++refits_;
      since_refit_ = 0;
      timing_log_.push_back(
          {refits_, timers_.mean_online_update_ns(), timers_.mean_refit_ns()});
    }
  }

  // Snapshot for persistence. Only meaningful for learning policies.
  ModelBundle bundle(std::string training_log_ref = {}) const {
    if (!is_learning_policy(policy_.kind))
      throw std::logic_error("policy has no model to bundle");
    ModelBundle b;
    b.kind = policy_.kind == PolicyKind::kMeuzzOl   ? ModelKind::kOL
             : policy_.kind == PolicyKind::kMeuzzRf ? ModelKind::kRF
                                                    : ModelKind::kEN;
    b.ol = ol_;
    b.rf = rf_;
    b.training_log_ref = std::move(training_log_ref);
    return b;
  }

  const OnlineLinearModel* linear_model() const { return ol_ ? &*ol_ : nullptr; }
  const RandomForestModel* forest_model() const { return rf_ ? &*rf_ : nullptr; }
  const std::vector<PendingLabel>& pending() const { return pending_; }
  const std::vector<DispatchRecord>& records() const { return records_; }
  const std::vector<LabeledRow>& training_rows() const { return training_rows_; }
  const StageTimers& timers() const { return timers_; }
  const std::vector<TimingSnapshot>& timing_log() const { return timing_log_; }
  std::uint64_t ignored_feedback() const { return ignored_feedback_; }
  std::uint64_t refits() const { return refits_; }

 private:
  FeatureVector timed_extract(const Seed& s, const ProgramModel& model,
                              const FuzzerStateView& state) const {
    detail::StageTimer t(timers_.feature_ns, timers_.feature_n);
    return extract_features(s, model, state);
  }

  SchedulerPolicy policy_;
  CoordinatorConfig cfg_;
  std::optional<OnlineLinearModel> ol_;
  std::optional<RandomForestModel> rf_;
  std::vector<TrainingExample> forest_data_;
  int since_refit_ = 0;
  std::uint64_t refits_ = 0;
  std::unordered_set<SeedId> dispatched_;
  std::vector<PendingLabel> pending_;
  std::vector<DispatchRecord> records_;
  std::unordered_map<SeedId, std::size_t> record_index_;
  std::vector<LabeledRow> training_rows_;
  std::uint64_t ignored_feedback_ = 0;
  mutable StageTimers timers_;
  std::vector<TimingSnapshot> timing_log_;
};

}  // namespace seedsched
