#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "seedsched/coverage.hpp"
#include "seedsched/csv.hpp"
#include "seedsched/seed.hpp"

// The 10 utility features of a seed. Label features sum over distinct trace
// branches (a reachable bug counts once); instruction-count features sum over
// raw occurrences (work scales with executions); path_length is the raw,
// non-deduplicated trace length.

namespace seedsched {

struct FeatureVector {
  std::uint32_t reachable_labels = 0;
  std::uint32_t reached_labels = 0;
  std::uint32_t undiscovered_neighbors = 0;
  std::uint32_t external_calls = 0;
  std::uint32_t cmp_count = 0;
  std::uint32_t indirect_calls = 0;
  std::uint32_t path_length = 0;
  std::uint32_t input_size = 0;
  std::uint8_t first_new_cov = 0;  // 0/1
  std::uint32_t queue_size = 0;

  static constexpr int kDim = 10;

  // Fixed field order, everywhere.
  std::array<double, kDim> as_raw() const {
    return {static_cast<double>(reachable_labels), static_cast<double>(reached_labels),
            static_cast<double>(undiscovered_neighbors), static_cast<double>(external_calls),
            static_cast<double>(cmp_count), static_cast<double>(indirect_calls),
            static_cast<double>(path_length), static_cast<double>(input_size),
            static_cast<double>(first_new_cov), static_cast<double>(queue_size)};
  }

  Eigen::VectorXd as_vector() const {
    auto raw = as_raw();
    return Eigen::Map<const Eigen::VectorXd>(raw.data(), kDim);
  }

  bool operator==(const FeatureVector&) const = default;
};

inline constexpr const char* kFeatureCsvHeader =
    "reachable_labels,reached_labels,undiscovered_neighbors,external_calls,cmp_count,"
    "indirect_calls,path_length,input_size,first_new_cov,queue_size";

inline std::string to_csv_row(const FeatureVector& v) {
  auto raw = v.as_raw();
  std::string s;
  for (int i = 0; i < FeatureVector::kDim; ++i) {
    if (i) s += ',';
    s += std::to_string(static_cast<std::uint64_t>(raw[i]));
  }
  return s;
}

// Snapshot of the live fuzzer state at query time.
struct FuzzerStateView {
  std::uint32_t queue_size = 0;
  const CoverageStore* coverage = nullptr;
};

inline FeatureVector extract_features(const Seed& seed, const ProgramModel& model,
                                      const FuzzerStateView& state) {
  if (seed.trace.empty()) throw std::invalid_argument("seed trace is empty");
  const auto& table = model.reachable_label_table();

  FeatureVector v;
  v.path_length = static_cast<std::uint32_t>(seed.trace.size());
  for (BranchId b : seed.trace) {
    if (b >= model.branch_count()) throw std::out_of_range("invalid branch id in trace");
    const auto& a = model.branches[b];
    v.external_calls += a.external_calls;
    v.cmp_count += a.cmp_count;
    v.indirect_calls += a.indirect_calls;
  }

  std::vector<BranchId> distinct(seed.trace.begin(), seed.trace.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (BranchId b : distinct) {
    v.reachable_labels += table[b];
    v.reached_labels += model.branches[b].local_labels;
  }

  v.undiscovered_neighbors = state.coverage->undiscovered_neighbors(seed.trace);
  v.input_size = seed.size;
  v.first_new_cov = seed.first_new_cov ? 1 : 0;
  v.queue_size = state.queue_size;
  return v;
}

// Scaling for the linear model: log(1+x) on the unbounded count fields,
// first_new_cov passed through. The random forest consumes raw counts.
inline Eigen::VectorXd transform_for_linear(const FeatureVector& v) {
  auto raw = v.as_raw();
  Eigen::VectorXd out(FeatureVector::kDim);
  for (int i = 0; i < FeatureVector::kDim; ++i)
    out[i] = (i == 8) ? raw[i] : std::log1p(raw[i]);
  return out;
}

}  // namespace seedsched
