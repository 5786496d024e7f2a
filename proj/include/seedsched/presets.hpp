#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seedsched/program_model.hpp"

// Shipped benchmark presets. Constants here are harness ground truth, chosen
// so that the utility features carry real signal: labels sit where scheduling
// decisions matter and hardness gates exploration mass.

namespace seedsched {

struct Preset {
  std::string name;
  std::string description;
  GenParams params;
  std::uint64_t default_seed;
};

inline const std::vector<Preset>& benchmark_presets() {
  static const std::vector<Preset> presets = [] {
    std::vector<Preset> out;

    {
      // Utility is proportional to the label mass behind hard gates: the
      // schedulable signal the learners are supposed to find.
      GenParams p;
      p.branch_count = 1000;
      p.hard_fraction = 0.3;
      p.hard_placement = HardPlacement::kGateway;
      p.group_size_max = 5;       // wider conditionals: more path variety
      p.hard_gateway_cap = 150;   // 150 gates guard medium pockets, the rest scatter
      p.gateway_max_mass = 60;    // no decisive mega-gates
      p.label_density = 0.35;
      p.label_placement = LabelPlacement::kHardGuarded;
      p.chain_bias = 0.15;
      p.cmp_max = 4;
      p.external_max = 0;   // solver noise axes live in the call-heavy preset
      p.indirect_max = 0;
      out.push_back({"learnable", "labels concentrate behind hard gates", p, 11});
    }
    {
      // Labels live deep down a long chain and path length drives input
      // size, so small seeds are exactly the wrong ones to schedule.
      GenParams p;
      p.branch_count = 600;
      p.hard_fraction = 0.15;
      p.hard_placement = HardPlacement::kGateway;
      p.label_density = 0.5;
      p.label_placement = LabelPlacement::kDeep;
      p.chain_bias = 0.9;
      p.cmp_max = 4;
      p.external_max = 0;
      p.indirect_max = 0;
      p.size_per_branch = 8;
      p.size_jitter = 3;
      out.push_back({"size-misleading", "only long (large) inputs approach the labeled region",
                     p, 12});
    }
    {
      GenParams p;
      p.branch_count = 400;
      p.hard_fraction = 0.0;
      p.label_density = 0.2;
      p.chain_bias = 0.2;
      out.push_back({"flat-easy", "shallow, fully fuzzable control flow", p, 13});
    }
    {
      GenParams p;
      p.branch_count = 800;
      p.hard_fraction = 0.4;
      p.hard_placement = HardPlacement::kGateway;
      p.hard_gateway_cap = 120;
      p.gateway_max_mass = 50;
      p.label_density = 0.25;
      p.label_placement = LabelPlacement::kHardGuarded;
      p.chain_bias = 0.4;
      p.external_max = 0;
      p.indirect_max = 0;
      out.push_back({"hard-gates", "heavily gated exploration", p, 14});
    }
    {
      GenParams p;
      p.branch_count = 700;
      p.hard_fraction = 0.2;
      p.label_density = 0.3;
      p.label_placement = LabelPlacement::kDeep;
      p.chain_bias = 0.95;
      out.push_back({"deep-chain", "long call-chain topology", p, 15});
    }
    {
      GenParams p;
      p.branch_count = 900;
      p.group_size_min = 4;
      p.group_size_max = 8;
      p.hard_fraction = 0.25;
      p.hard_placement = HardPlacement::kGateway;
      p.hard_gateway_cap = 100;
      p.gateway_max_mass = 70;
      p.label_density = 0.25;
      p.label_placement = LabelPlacement::kHardGuarded;
      p.external_max = 0;
      p.indirect_max = 0;
      out.push_back({"wide-switch", "4- to 8-way conditionals", p, 16});
    }
    {
      GenParams p;
      p.branch_count = 600;
      p.hard_fraction = 0.3;
      p.hard_placement = HardPlacement::kGateway;
      p.label_density = 0.05;
      out.push_back({"sparse-labels", "few sanitizer checks", p, 17});
    }
    {
      GenParams p;
      p.branch_count = 600;
      p.hard_fraction = 0.3;
      p.hard_placement = HardPlacement::kGateway;
      p.label_density = 0.6;
      out.push_back({"dense-labels", "sanitizer checks almost everywhere", p, 18});
    }
    {
      GenParams p;
      p.branch_count = 500;
      p.hard_fraction = 0.25;
      p.external_max = 6;
      p.indirect_max = 3;
      p.label_density = 0.2;
      out.push_back({"call-heavy", "external and indirect calls hamper the solver", p, 19});
    }
    {
      GenParams p;
      p.branch_count = 500;
      p.hard_fraction = 0.25;
      p.cmp_max = 20;
      p.label_density = 0.2;
      out.push_back({"cmp-heavy", "expensive path constraints", p, 20});
    }
    return out;
  }();
  return presets;
}

inline const Preset& find_preset(const std::string& name) {
  for (const auto& p : benchmark_presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : benchmark_presets()) {
    if (!known.empty()) known += ", ";
    known += p.name;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
}

// Program references accepted by the CLI and the experiment runner:
//   preset:<name>[,seed=<n>]
//   params:branches=<n>,groups=<lo>-<hi>,hard=<f>,labels=<f>[,seed=<n>,...]
//   anything else is read as a program file path
inline ProgramModel resolve_program(const std::string& ref) {
  auto starts_with = [&](const char* prefix) { return ref.rfind(prefix, 0) == 0; };

  auto split_kv = [](const std::string& body) {
    std::vector<std::pair<std::string, std::string>> kvs;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("expected key=value in program spec: " + item);
      kvs.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return kvs;
  };

  if (starts_with("preset:")) {
    std::string body = ref.substr(7);
    std::string name = body;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto comma = body.find(',');
    if (comma != std::string::npos) {
      name = body.substr(0, comma);
      for (auto& [k, v] : split_kv(body.substr(comma + 1))) {
        if (k == "seed") {
          seed = std::stoull(v);
          seed_set = true;
        } else {
          throw std::invalid_argument("unknown preset option: " + k);
        }
      }
    }
    const Preset& p = find_preset(name);
    return generate_program(p.params, seed_set ? seed : p.default_seed, p.name);
  }

  if (starts_with("params:")) {
    GenParams p;
    std::uint64_t seed = 1;
    std::string name = "custom";
    for (auto& [k, v] : split_kv(ref.substr(7))) {
      if (k == "branches") p.branch_count = static_cast<std::uint32_t>(std::stoul(v));
      else if (k == "groups") {
        auto dash = v.find('-');
        if (dash == std::string::npos) throw std::invalid_argument("groups wants lo-hi");
        p.group_size_min = static_cast<std::uint32_t>(std::stoul(v.substr(0, dash)));
        p.group_size_max = static_cast<std::uint32_t>(std::stoul(v.substr(dash + 1)));
      } else if (k == "hard") p.hard_fraction = std::stod(v);
      else if (k == "labels") p.label_density = std::stod(v);
      else if (k == "chain") p.chain_bias = std::stod(v);
      else if (k == "cmp") p.cmp_max = static_cast<std::uint32_t>(std::stoul(v));
      else if (k == "ext") p.external_max = static_cast<std::uint32_t>(std::stoul(v));
      else if (k == "ind") p.indirect_max = static_cast<std::uint32_t>(std::stoul(v));
      else if (k == "seed") seed = std::stoull(v);
      else if (k == "name") name = v;
      else throw std::invalid_argument("unknown program parameter: " + k);
    }
    return generate_program(p, seed, name);
  }

  return load_program(ref);
}

}  // namespace seedsched
