#include <catch2/catch_amalgamated.hpp>

#include "seedsched/random_forest.hpp"
#include "seedsched/rng.hpp"

using namespace seedsched;

namespace {

std::vector<TrainingExample> make_dataset(Rng& rng, int n, int d) {
  std::vector<TrainingExample> data;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform01() * 10.0;
    data.push_back({x, rng.uniform01() * 100.0});
  }
  return data;
}

}  // namespace

TEST_CASE("constant targets predict the constant everywhere", "[random_forest]") {
  Rng rng(1);
  auto data = make_dataset(rng, 50, 4);
  for (auto& ex : data) ex.y = 7.5;
  auto m = RandomForestModel::fit(data, {}, 9);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(4);
    for (int k = 0; k < 4; ++k) x[k] = rng.uniform01() * 10.0;
    REQUIRE(m.predict(x) == 7.5);
  }
}

TEST_CASE("a single full tree memorizes distinct training points", "[random_forest]") {
  Rng rng(2);
  const int d = 5;
  auto data = make_dataset(rng, 64, d);
  for (int i = 0; i < 64; ++i) data[i].x[0] = i;  // guarantees separability
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.min_samples_leaf = 1;
  p.features_per_split = d;
  auto m = RandomForestModel::fit(data, p, 3);
  for (const auto& ex : data) REQUIRE(m.predict(ex.x) == ex.y);
}

TEST_CASE("co-located points with different targets predict their mean", "[random_forest]") {
  Eigen::VectorXd x(3);
  x << 1, 2, 3;
  std::vector<TrainingExample> data{{x, 2.0}, {x, 4.0}};
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.min_samples_leaf = 1;
  auto m = RandomForestModel::fit(data, p, 1);
  REQUIRE(m.predict(x) == 3.0);
}

TEST_CASE("fitting on empty data is an error", "[random_forest]") {
  REQUIRE_THROWS_AS(RandomForestModel::fit({}, {}, 1), std::invalid_argument);
}

TEST_CASE("prediction averages the trees and stays within leaf range", "[random_forest]") {
  Rng rng(4);
  auto data = make_dataset(rng, 120, 6);
  ForestParams p;
  p.n_trees = 25;
  auto m = RandomForestModel::fit(data, p, 11);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& t : m.trees)
    for (const auto& nd : t.nodes)
      if (nd.feature < 0) {
        lo = std::min(lo, nd.prediction);
        hi = std::max(hi, nd.prediction);
      }
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(6);
    for (int k = 0; k < 6; ++k) x[k] = rng.uniform01() * 10.0;
    const double pred = m.predict(x);
    REQUIRE(pred >= lo);
    REQUIRE(pred <= hi);
  }
}

TEST_CASE("fit is deterministic in the rng seed", "[random_forest]") {
  Rng rng(5);
  auto data = make_dataset(rng, 80, 5);
  auto a = RandomForestModel::fit(data, {}, 42);
  auto b = RandomForestModel::fit(data, {}, 42);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      REQUIRE(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
      REQUIRE(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
      REQUIRE(a.trees[t].nodes[n].prediction == b.trees[t].nodes[n].prediction);
    }
  }
  auto c = RandomForestModel::fit(data, {}, 43);
  bool any_diff = false;
  for (std::size_t t = 0; t < a.trees.size() && !any_diff; ++t)
    any_diff = a.trees[t].nodes.size() != c.trees[t].nodes.size();
  REQUIRE(any_diff);
}

TEST_CASE("importance concentrates on a single informative feature", "[random_forest]") {
  Rng rng(6);
  const int d = 6;
  std::vector<TrainingExample> data;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 3.0);  // others constant
    x[0] = rng.uniform01() * 10.0;
    data.push_back({x, x[0]});
  }
  auto m = RandomForestModel::fit(data, {}, 13);
  auto imp = m.feature_importance();
  REQUIRE(imp[0] > 0.99);
  REQUIRE_THAT(imp.sum(), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("no split means an all-zero importance vector", "[random_forest]") {
  Rng rng(7);
  auto data = make_dataset(rng, 30, 4);
  for (auto& ex : data) ex.y = -1.0;
  auto m = RandomForestModel::fit(data, {}, 2);
  REQUIRE(m.feature_importance().isZero(0.0));
}

TEST_CASE("importances are nonnegative and sum to one when splits exist", "[random_forest]") {
  Rng rng(8);
  for (int round = 0; round < 10; ++round) {
    auto data = make_dataset(rng, 60 + static_cast<int>(rng.index(100)), 5);
    auto m = RandomForestModel::fit(data, {}, rng.next_u64());
    auto imp = m.feature_importance();
    bool any_split = false;
    for (const auto& t : m.trees)
      for (const auto& nd : t.nodes) any_split = any_split || nd.feature >= 0;
    if (!any_split) continue;
    for (int i = 0; i < 5; ++i) REQUIRE(imp[i] >= 0.0);
    REQUIRE_THAT(imp.sum(), Catch::Matchers::WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("unfitted forests refuse to predict", "[random_forest]") {
  RandomForestModel m;
  REQUIRE_FALSE(m.fitted());
  REQUIRE_THROWS_AS(m.predict(Eigen::VectorXd::Zero(3)), std::logic_error);
  REQUIRE_THROWS_AS(m.feature_importance(), std::logic_error);
}
