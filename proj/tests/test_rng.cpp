#include <catch2/catch_amalgamated.hpp>

#include "seedsched/rng.hpp"

using namespace seedsched;

TEST_CASE("rng streams are deterministic", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("bounded draws stay in range and hit all values", "[rng]") {
  Rng rng(7);
  std::array<int, 5> hits{};
  for (int i = 0; i < 5000; ++i) {
    auto v = rng.bounded(5);
    REQUIRE(v < 5);
    ++hits[v];
  }
  for (int h : hits) REQUIRE(h > 0);
}

TEST_CASE("range is inclusive on both ends", "[rng]") {
  Rng rng(3);
  bool lo = false, hi = false;
  for (int i = 0; i < 2000; ++i) {
    auto v = rng.range(2, 4);
    REQUIRE(v >= 2);
    REQUIRE(v <= 4);
    lo = lo || v == 2;
    hi = hi || v == 4;
  }
  REQUIRE(lo);
  REQUIRE(hi);
}

TEST_CASE("uniform01 lies in [0,1)", "[rng]") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    double v = rng.uniform01();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("mix_seed separates nearby keys", "[rng]") {
  REQUIRE(mix_seed(1, 2) != mix_seed(2, 1));
  REQUIRE(mix_seed(0, 0) != mix_seed(0, 1));
  REQUIRE(splitmix64(5) == splitmix64(5));
}
