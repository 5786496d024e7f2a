#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "seedsched/coordinator.hpp"
#include "seedsched/presets.hpp"

using namespace seedsched;

namespace {

struct Fixture {
  std::shared_ptr<ProgramModel> model;
  CoverageStore coverage;
  LineageIndex lineage;
  std::vector<Seed> queue;

  Fixture() : model(make_model()), coverage(*model) {}

  static std::shared_ptr<ProgramModel> make_model() {
    GenParams p;
    p.branch_count = 40;
    p.hard_fraction = 0.2;
    p.label_density = 0.4;
    return std::make_shared<ProgramModel>(generate_program(p, 77));
  }

  void add_seeds(int n, Rng& rng) {
    for (int i = 0; i < n; ++i) {
      Seed s;
      s.id = static_cast<SeedId>(queue.size());
      s.origin = SeedOrigin::kInitial;
      s.trace = {model->entry};
      for (int k = 0; k < 6; ++k)
        s.trace.push_back(static_cast<BranchId>(rng.index(model->branch_count())));
      s.size = static_cast<std::uint32_t>(rng.range(1, 300));
      s.first_new_cov = rng.chance(0.4);
      lineage.record_seed(s);
      queue.push_back(std::move(s));
    }
  }

  FuzzerStateView view() const { return {static_cast<std::uint32_t>(queue.size()), &coverage}; }
};

FeatureVector label_features(std::uint32_t x) {
  FeatureVector f;
  f.reachable_labels = x;
  f.path_length = 1 + x;
  return f;
}

}  // namespace

TEST_CASE("random ranking is deterministic per policy seed", "[coordinator]") {
  Fixture fx;
  Rng rng(1);
  fx.add_seeds(20, rng);
  Coordinator a({PolicyKind::kRandom, 99}, {});
  auto r1 = a.rank_queue(fx.queue, *fx.model, fx.view());
  auto r2 = a.rank_queue(fx.queue, *fx.model, fx.view());
  REQUIRE(r1 == r2);

  Coordinator b({PolicyKind::kRandom, 100}, {});
  REQUIRE(a.rank_queue(fx.queue, *fx.model, fx.view()) !=
          b.rank_queue(fx.queue, *fx.model, fx.view()));
}

TEST_CASE("heuristic ranking prefers new coverage, then small size", "[coordinator]") {
  Fixture fx;
  Seed a;
  a.id = 0;
  a.trace = {0};
  a.size = 9;
  a.first_new_cov = true;
  Seed b;
  b.id = 1;
  b.trace = {0};
  b.size = 2;
  b.first_new_cov = false;
  fx.lineage.record_seed(a);
  fx.lineage.record_seed(b);
  fx.queue = {a, b};

  Coordinator c({PolicyKind::kHeuristicAfl, 1}, {});
  auto ranked = c.rank_queue(fx.queue, *fx.model, fx.view());
  REQUIRE(ranked[0].first == 0);  // new coverage beats small size

  Seed small = b, large = b;
  small.id = 2;
  large.id = 3;
  large.size = 50;
  fx.queue = {large, small};
  ranked = c.rank_queue(fx.queue, *fx.model, fx.view());
  REQUIRE(ranked[0].first == 2);  // among equals, smaller size first
}

TEST_CASE("zero-weight linear model ties break by seed id", "[coordinator]") {
  Fixture fx;
  Rng rng(2);
  fx.add_seeds(10, rng);
  ModelBundle init;
  init.kind = ModelKind::kOL;
  init.ol = OnlineLinearModel::init(FeatureVector::kDim, 1.0, 0);
  init.ol->w.setZero();
  Coordinator zeroed({PolicyKind::kMeuzzOl, 5}, {}, init);
  auto ranked = zeroed.rank_queue(fx.queue, *fx.model, fx.view());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    REQUIRE(ranked[i].second == 0.0);
    REQUIRE(ranked[i].first == i);  // ascending ids on ties
  }
}

TEST_CASE("re-ranking without model updates returns the same order", "[coordinator]") {
  Fixture fx;
  Rng rng(21);
  fx.add_seeds(15, rng);
  for (PolicyKind kind : {PolicyKind::kMeuzzOl, PolicyKind::kMeuzzEn, PolicyKind::kRandom,
                          PolicyKind::kHeuristicAfl}) {
    Coordinator c({kind, 33}, {});
    auto r1 = c.rank_queue(fx.queue, *fx.model, fx.view());
    auto r2 = c.rank_queue(fx.queue, *fx.model, fx.view());
    REQUIRE(r1 == r2);
  }
}

TEST_CASE("dispatch takes the argmax, marks it, and registers a label", "[coordinator]") {
  Fixture fx;
  Rng rng(3);
  fx.add_seeds(3, rng);
  Coordinator c({PolicyKind::kRandom, 7}, {});
  auto ranked = c.rank_queue(fx.queue, *fx.model, fx.view());
  auto recs = c.dispatch(fx.queue, 1, *fx.model, fx.view(), 4, fx.lineage);
  REQUIRE(recs.size() == 1);
  REQUIRE(recs[0].seed == ranked[0].first);
  REQUIRE(recs[0].tick == 4);
  REQUIRE(c.dispatched(recs[0].seed));
  REQUIRE(fx.lineage.is_root(recs[0].seed));
  REQUIRE(c.pending().size() == 1);
  REQUIRE(c.pending()[0].matures_at == 4 + c.config().label_window);
}

TEST_CASE("dispatch never repeats a seed and drains the queue", "[coordinator]") {
  Fixture fx;
  Rng rng(4);
  fx.add_seeds(5, rng);
  Coordinator c({PolicyKind::kRandom, 7}, {});
  std::set<SeedId> seen;
  for (int round = 0; round < 3; ++round)
    for (auto& r : c.dispatch(fx.queue, 2, *fx.model, fx.view(), round, fx.lineage))
      REQUIRE(seen.insert(r.seed).second);
  REQUIRE(seen.size() == 5);  // k > remaining eligible returns the rest, no duplicates
  REQUIRE(c.dispatch(fx.queue, 2, *fx.model, fx.view(), 9, fx.lineage).empty());
}

TEST_CASE("feedback updates the linear model once per pair", "[coordinator]") {
  Coordinator c({PolicyKind::kMeuzzOl, 8}, {});
  REQUIRE(c.linear_model()->t == 0);
  c.feedback({{label_features(1), 2.0}});
  REQUIRE(c.linear_model()->t == 1);
  c.feedback({{label_features(2), 3.0}, {label_features(3), 4.0}});
  REQUIRE(c.linear_model()->t == 3);
}

TEST_CASE("forest refits only when the batch threshold fills", "[coordinator]") {
  CoordinatorConfig cfg;
  cfg.refit_batch = 16;
  cfg.forest.n_trees = 5;
  Coordinator c({PolicyKind::kMeuzzRf, 9}, cfg);
  std::vector<std::pair<FeatureVector, double>> batch;
  for (std::uint32_t i = 0; i < 15; ++i) batch.push_back({label_features(i), double(i)});
  c.feedback(batch);
  REQUIRE_FALSE(c.forest_model()->fitted());  // 15 labels: no refit yet
  c.feedback({{label_features(99), 42.0}});
  REQUIRE(c.forest_model()->fitted());  // 16th triggers it
  REQUIRE(c.refits() == 1);
}

TEST_CASE("ensemble feedback touches both models", "[coordinator]") {
  CoordinatorConfig cfg;
  cfg.refit_batch = 4;
  cfg.forest.n_trees = 5;
  Coordinator c({PolicyKind::kMeuzzEn, 10}, cfg);
  std::vector<std::pair<FeatureVector, double>> batch;
  for (std::uint32_t i = 0; i < 4; ++i) batch.push_back({label_features(i), double(i)});
  c.feedback(batch);
  REQUIRE(c.linear_model()->t == 4);
  REQUIRE(c.forest_model()->fitted());
}

TEST_CASE("feedback on non-learning policies is a counted no-op", "[coordinator]") {
  Coordinator c({PolicyKind::kHeuristicAfl, 11}, {});
  c.feedback({{label_features(1), 5.0}});
  REQUIRE(c.ignored_feedback() == 1);
  Coordinator r({PolicyKind::kRandom, 11}, {});
  r.feedback({{label_features(1), 5.0}, {label_features(2), 5.0}});
  REQUIRE(r.ignored_feedback() == 2);
}

TEST_CASE("maturation fills dispatch records and the training log", "[coordinator]") {
  Fixture fx;
  Rng rng(5);
  fx.add_seeds(2, rng);
  CoordinatorConfig cfg;
  cfg.label_window = 3;
  Coordinator c({PolicyKind::kMeuzzOl, 12}, cfg);
  auto recs = c.dispatch(fx.queue, 1, *fx.model, fx.view(), 0, fx.lineage);
  REQUIRE(recs.size() == 1);

  REQUIRE(c.mature(fx.lineage, 2).empty());  // window not elapsed
  auto pairs = c.mature(fx.lineage, 3);      // boundary inclusive
  REQUIRE(pairs.size() == 1);
  REQUIRE(pairs[0].second == 1.0);  // lone root
  REQUIRE(c.records()[0].label == 1.0);
  REQUIRE(c.training_rows().size() == 1);
  REQUIRE(c.pending().empty());
}

TEST_CASE("initial bundles override freshly initialized models", "[coordinator]") {
  ModelBundle init;
  init.kind = ModelKind::kOL;
  init.ol = OnlineLinearModel::init(FeatureVector::kDim, 1.0, 123);
  init.ol->w.setConstant(0.25);
  Coordinator c({PolicyKind::kMeuzzOl, 13}, {}, init);
  REQUIRE(c.linear_model()->w == init.ol->w);
  auto b = c.bundle("log.csv");
  REQUIRE(b.kind == ModelKind::kOL);
  REQUIRE(b.ol->w == init.ol->w);
  REQUIRE(b.training_log_ref == "log.csv");
}

TEST_CASE("non-learning policies have no bundle", "[coordinator]") {
  Coordinator c({PolicyKind::kRandom, 14}, {});
  REQUIRE_THROWS_AS(c.bundle(), std::logic_error);
}

TEST_CASE("policy strings round-trip and reject junk", "[coordinator]") {
  for (auto k : {PolicyKind::kRandom, PolicyKind::kHeuristicAfl, PolicyKind::kMeuzzOl,
                 PolicyKind::kMeuzzRf, PolicyKind::kMeuzzEn})
    REQUIRE(policy_from_string(to_string(k)) == k);
  REQUIRE_THROWS_AS(policy_from_string("qsym"), std::invalid_argument);
}
