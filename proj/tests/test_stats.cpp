#include <catch2/catch_amalgamated.hpp>

#include "seedsched/rng.hpp"
#include "seedsched/stats.hpp"

using namespace seedsched;

TEST_CASE("identical samples are maximally insignificant", "[stats]") {
  std::vector<double> a{1, 2, 3}, b{1, 2, 3};
  auto r = mann_whitney_u(a, b);
  REQUIRE(r.p >= 0.9);
}

TEST_CASE("completely separated samples give U = 0", "[stats]") {
  std::vector<double> a{1, 2, 3, 4, 5}, b{6, 7, 8, 9, 10};
  auto r = mann_whitney_u(a, b);
  REQUIRE(r.u == 0.0);
  REQUIRE(r.p < 0.05);
}

TEST_CASE("swapping the samples mirrors U about its maximum", "[stats]") {
  Rng rng(12);
  for (int round = 0; round < 50; ++round) {
    std::vector<double> a, b;
    const auto na = 3 + rng.index(8), nb = 3 + rng.index(8);
    for (std::size_t i = 0; i < na; ++i) a.push_back(static_cast<double>(rng.index(10)));
    for (std::size_t i = 0; i < nb; ++i) b.push_back(static_cast<double>(rng.index(10)));
    auto ab = mann_whitney_u(a, b);
    auto ba = mann_whitney_u(b, a);
    REQUIRE_THAT(ab.u + ba.u, Catch::Matchers::WithinAbs(double(na * nb), 1e-9));
    REQUIRE_THAT(ab.p, Catch::Matchers::WithinAbs(ba.p, 1e-12));
  }
}

TEST_CASE("values agree with a reference implementation", "[stats]") {
  // frozen from scipy.stats.mannwhitneyu(..., method="asymptotic")
  std::vector<double> a{3.1, 4.5, 2.2, 5.0, 3.3}, b{4.0, 6.1, 5.5, 7.2, 6.6};
  auto r = mann_whitney_u(a, b);
  REQUIRE(r.u == 2.0);
  REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.0367138563627041, 1e-12));

  std::vector<double> c{1, 2, 2, 3}, d{2, 3, 4, 4};  // exercises the tie correction
  auto r2 = mann_whitney_u(c, d);
  REQUIRE(r2.u == 2.5);
  REQUIRE_THAT(r2.p, Catch::Matchers::WithinAbs(0.13416918012812584, 1e-12));
}

TEST_CASE("undersized samples are rejected", "[stats]") {
  std::vector<double> tiny{1, 2}, ok{1, 2, 3};
  REQUIRE_THROWS_AS(mann_whitney_u(tiny, ok), std::invalid_argument);
  REQUIRE_THROWS_AS(mann_whitney_u(ok, tiny), std::invalid_argument);
}
