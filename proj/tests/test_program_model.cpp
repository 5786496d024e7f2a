#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "seedsched/program_model.hpp"

using namespace seedsched;

namespace {

ProgramModel chain_with_labels(std::vector<std::uint32_t> locals) {
  ProgramModel m;
  m.name = "chain";
  const auto n = locals.size();
  m.branches.resize(n);
  m.successors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.branches[i].local_labels = locals[i];
    if (i + 1 < n) m.successors[i].push_back(static_cast<BranchId>(i + 1));
  }
  m.finalize();
  return m;
}

GenParams random_params(Rng& rng) {
  GenParams p;
  p.branch_count = static_cast<std::uint32_t>(rng.range(4, 64));
  p.group_size_min = 2;
  p.group_size_max = static_cast<std::uint32_t>(rng.range(2, 5));
  p.hard_fraction = rng.uniform01() * 0.5;
  p.label_density = rng.uniform01() * 0.6;
  p.chain_bias = rng.uniform01();
  p.label_placement = static_cast<LabelPlacement>(rng.index(3));
  p.hard_placement = static_cast<HardPlacement>(rng.index(2));
  return p;
}

}  // namespace

TEST_CASE("zero hard fraction forces all-easy", "[program_model]") {
  GenParams p;
  p.branch_count = 4;
  p.hard_fraction = 0.0;
  auto m = generate_program(p, 7);
  REQUIRE(m.branch_count() == 4);
  for (const auto& b : m.branches) REQUIRE_FALSE(b.is_hard());
  REQUIRE(m.groups.size() >= 1);
}

TEST_CASE("hard fraction is honored within one branch", "[program_model]") {
  GenParams p;
  p.branch_count = 100;
  p.hard_fraction = 0.3;
  auto m = generate_program(p, 1);
  int hard = 0;
  for (const auto& b : m.branches) hard += b.is_hard() ? 1 : 0;
  REQUIRE(hard >= 29);
  REQUIRE(hard <= 31);
}

TEST_CASE("generation is a pure function of params and seed", "[program_model]") {
  GenParams p;
  p.branch_count = 60;
  p.hard_fraction = 0.25;
  auto a = generate_program(p, 123);
  auto b = generate_program(p, 123);
  REQUIRE(program_to_json(a) == program_to_json(b));
  auto c = generate_program(p, 124);
  REQUIRE(program_to_json(a) != program_to_json(c));
}

TEST_CASE("generator rejects invalid parameters", "[program_model]") {
  GenParams small;
  small.branch_count = 3;
  REQUIRE_THROWS_AS(generate_program(small, 1), std::invalid_argument);
  GenParams bad_range;
  bad_range.group_size_min = 3;
  bad_range.group_size_max = 2;
  REQUIRE_THROWS_AS(generate_program(bad_range, 1), std::invalid_argument);
}

TEST_CASE("reachable label table on a linear chain", "[program_model]") {
  auto m = chain_with_labels({1, 2, 3});
  const auto& table = reachable_label_table(m);
  REQUIRE(table[0] == 6);
  REQUIRE(table[1] == 5);
  REQUIRE(table[2] == 3);
}

TEST_CASE("leaf branch with no labels reaches zero", "[program_model]") {
  auto m = chain_with_labels({1, 2, 0});
  REQUIRE(reachable_label_table(m)[2] == 0);
}

TEST_CASE("path of two branches with six labels in reach scores six", "[program_model]") {
  // entry fans out to b1 and b2; b1 guards a sub-branch carrying more labels,
  // b2 is a leaf. The reachable sets of b1 and b2 are disjoint and hold six
  // labels between them.
  ProgramModel m;
  m.name = "fig";
  m.branches.resize(4);
  m.successors.resize(4);
  m.successors[0] = {1, 2};
  m.successors[1] = {3};
  m.branches[1].local_labels = 1;
  m.branches[3].local_labels = 3;
  m.branches[2].local_labels = 2;
  m.finalize();
  const auto& table = reachable_label_table(m);
  REQUIRE(table[1] == 4);
  REQUIRE(table[2] == 2);
  REQUIRE(table[1] + table[2] == 6);
}

TEST_CASE("reachability table matches brute-force DFS on random models", "[program_model]") {
  Rng rng(2024);
  for (int round = 0; round < 30; ++round) {
    auto m = generate_program(random_params(rng), rng.next_u64());
    const auto& table = reachable_label_table(m);
    for (BranchId b = 0; b < m.branch_count(); ++b)
      REQUIRE(table[b] == oracles::brute_reachable_labels(m, b));
  }
}

TEST_CASE("generated models satisfy structural invariants", "[program_model]") {
  Rng rng(99);
  for (int round = 0; round < 20; ++round) {
    auto m = generate_program(random_params(rng), rng.next_u64());
    std::vector<int> membership(m.branch_count(), 0);
    for (const auto& g : m.groups) {
      REQUIRE(g.members.size() >= 2);
      for (BranchId b : g.members) ++membership[b];
    }
    for (int c : membership) REQUIRE(c <= 1);
    REQUIRE(membership[m.entry] == 0);
    for (BranchId b = 0; b < m.branch_count(); ++b) {
      REQUIRE(m.branches[b].local_labels <= m.branches[b].reachable_labels);
      if (m.branches[b].is_hard()) {
        REQUIRE(m.branches[b].magic_width >= m.params.magic_width_min);
        REQUIRE(m.branches[b].magic_width <= m.params.magic_width_max);
      }
    }
  }
}

TEST_CASE("program files round-trip", "[program_model]") {
  GenParams p;
  p.branch_count = 40;
  p.hard_fraction = 0.2;
  auto m = generate_program(p, 5);
  auto path = std::filesystem::temp_directory_path() / "seedsched_prog_rt.json";
  save_program(m, path);
  auto loaded = load_program(path);
  REQUIRE(program_to_json(m) == program_to_json(loaded));
  std::filesystem::remove(path);
}

TEST_CASE("loading rejects tampered and wrong-version files", "[program_model]") {
  GenParams p;
  p.branch_count = 10;
  auto m = generate_program(p, 2);
  auto j = program_to_json(m);

  auto wrong_version = j;
  wrong_version["version"] = 999;
  REQUIRE_THROWS_WITH(program_from_json(wrong_version),
                      Catch::Matchers::ContainsSubstring("version"));

  auto inconsistent = j;
  inconsistent["branches"][0]["reachable_labels"] =
      inconsistent["branches"][0]["reachable_labels"].get<int>() + 5;
  REQUIRE_THROWS_WITH(program_from_json(inconsistent),
                      Catch::Matchers::ContainsSubstring("inconsistent"));

  auto not_program = j;
  not_program["format"] = "something-else";
  REQUIRE_THROWS(program_from_json(not_program));
}

TEST_CASE("finalize rejects malformed models", "[program_model]") {
  ProgramModel unreachable;
  unreachable.branches.resize(3);
  unreachable.successors.resize(3);  // no edges: branches 1,2 unreachable
  REQUIRE_THROWS_AS(unreachable.finalize(), std::invalid_argument);

  ProgramModel overlapping;
  overlapping.branches.resize(4);
  overlapping.successors.resize(4);
  overlapping.successors[0] = {1, 2, 3};
  overlapping.groups.push_back({{1, 2}});
  overlapping.groups.push_back({{2, 3}});
  REQUIRE_THROWS_AS(overlapping.finalize(), std::invalid_argument);
}
