#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "seedsched/program_model.hpp"

namespace seedsched {

using SeedId = std::uint32_t;
using Tick = std::uint32_t;

enum class SeedOrigin : std::uint8_t { kInitial, kFuzzerMutation, kConcolicImport };

inline const char* to_string(SeedOrigin o) {
  switch (o) {
    case SeedOrigin::kInitial: return "initial";
    case SeedOrigin::kFuzzerMutation: return "fuzzer";
    case SeedOrigin::kConcolicImport: return "concolic";
  }
  return "?";
}

// A queue entry. parent is empty exactly when origin is kInitial.
struct Seed {
  SeedId id = 0;
  std::optional<SeedId> parent;
  SeedOrigin origin = SeedOrigin::kInitial;
  std::uint32_t size = 0;  // bytes
  std::vector<BranchId> trace;
  bool first_new_cov = false;
  Tick created_at = 0;
};

}  // namespace seedsched
