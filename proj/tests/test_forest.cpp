#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "ecodrive/forest.hpp"
#include "test_helpers.hpp"

using namespace ecodrive;
using namespace testutil;

namespace {

ForestParams quick_params(int ntree = 100, std::uint64_t seed = 7) {
  ForestParams params;
  params.ntree = ntree;
  params.mtry = 3;
  params.seed = seed;
  return params;
}

/// A forest of hand-built single-leaf trees, for contract tests.
ForestModel stub_model(std::vector<std::array<std::int64_t, 2>> leaf_counts) {
  ForestModel model;
  model.feature_order.assign(kFeatureNames.begin(), kFeatureNames.end());
  model.params.ntree = static_cast<int>(leaf_counts.size());
  for (const auto& counts : leaf_counts) {
    DecisionTree tree;
    TreeNode leaf;
    leaf.counts = counts;
    tree.nodes.push_back(leaf);
    model.trees.push_back(tree);
  }
  model.training_size = 1;
  return model;
}

}  // namespace

TEST_CASE("forest separates the synthetic rule with low OOB error") {
  const auto events = separable_events(200, 42);
  const ForestModel model = train_forest(events, quick_params(200));
  CHECK(model.oob_error <= 0.05);
  CHECK(model.training_size == 200);

  // training points from pure regions vote overwhelmingly for their label
  int strong = 0;
  for (const DrivingEvent& ev : events) {
    const Vote vote = predict(model, ev);
    CHECK(vote.label == separable_rule(ev));
    if (vote.vote_fraction > 0.9) ++strong;
  }
  CHECK(strong > 190);
}

TEST_CASE("training is deterministic given data and seed") {
  const auto events = separable_events(120, 9);
  TempDir dir("forest_determinism");
  save_model(train_forest(events, quick_params(60, 123)), dir.file("a.json"));
  save_model(train_forest(events, quick_params(60, 123)), dir.file("b.json"));
  CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));

  save_model(train_forest(events, quick_params(60, 124)), dir.file("c.json"));
  CHECK(read_file(dir.file("a.json")) != read_file(dir.file("c.json")));
}

TEST_CASE("training guards") {
  auto events = separable_events(50, 3);
  SUBCASE("single class") {
    for (DrivingEvent& ev : events) ev.label = Label::Efficient;
    CHECK_THROWS_AS(train_forest(events, quick_params()), SingleClassData);
  }
  SUBCASE("unlabeled events") {
    events[7].label = Label::Unlabeled;
    CHECK_THROWS_AS(train_forest(events, quick_params()), UnlabeledData);
  }
  SUBCASE("bad params") {
    ForestParams params = quick_params();
    params.mtry = 9;
    CHECK_THROWS_AS(train_forest(events, params), ConfigError);
    params = quick_params();
    params.ntree = 0;
    CHECK_THROWS_AS(train_forest(events, params), ConfigError);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(train_forest(std::vector<DrivingEvent>{}, quick_params()), EmptyInput);
  }
}

TEST_CASE("prediction vote contracts") {
  const DrivingEvent ev = make_event(50, 0, false, 0, 12, WeatherCondition::Clear);
  SUBCASE("single pure leaf votes with fraction 1") {
    const ForestModel model = stub_model({{5, 0}});
    const Vote vote = predict(model, ev);
    CHECK(vote.label == Label::Efficient);
    CHECK(vote.vote_fraction == 1.0);
  }
  SUBCASE("an exact split tie goes to Inefficient") {
    const ForestModel model = stub_model({{5, 0}, {0, 5}});
    const Vote vote = predict(model, ev);
    CHECK(vote.label == Label::Inefficient);
    CHECK(vote.vote_fraction == 0.5);
  }
  SUBCASE("a leaf count tie goes to Inefficient") {
    const ForestModel model = stub_model({{3, 3}});
    CHECK(predict(model, ev).label == Label::Inefficient);
  }
  SUBCASE("wrong feature order is a schema mismatch") {
    ForestModel model = stub_model({{5, 0}});
    std::swap(model.feature_order[0], model.feature_order[1]);
    CHECK_THROWS_AS(predict(model, ev), SchemaMismatch);
  }
}

TEST_CASE("each bootstrap leaves roughly a third of samples out") {
  const std::size_t n = 200;
  for (int t = 0; t < 50; ++t) {
    const auto bag = bootstrap_indices(99, t, n);
    REQUIRE(bag.size() == n);
    std::set<std::size_t> unique(bag.begin(), bag.end());
    const double oob_fraction =
        static_cast<double>(n - unique.size()) / static_cast<double>(n);
    CHECK(oob_fraction >= 0.25);
    CHECK(oob_fraction <= 0.50);
  }
}

TEST_CASE("gini split finder agrees with exhaustive enumeration") {
  Rng rng(555);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<FeatureVector> features;
    std::vector<int> labels01;
    for (std::size_t i = 0; i < n; ++i) {
      // small integer grid to force duplicate values and threshold ties
      features.push_back(FeatureVector{
          static_cast<double>(rng.range_int(0, 4)), static_cast<double>(rng.range_int(0, 4)),
          static_cast<double>(rng.range_int(0, 1)), static_cast<double>(rng.range_int(-2, 2)),
          static_cast<double>(rng.range_int(0, 23)), static_cast<double>(rng.range_int(0, 11))});
      labels01.push_back(static_cast<int>(rng.below(2)));
    }
    std::vector<std::size_t> node_samples(n);
    std::iota(node_samples.begin(), node_samples.end(), 0);
    const std::array<int, 6> all_features = {0, 1, 2, 3, 4, 5};

    const auto split =
        detail::find_best_split(features, labels01, node_samples, all_features, 1);

    // exhaustive reference: every feature, every midpoint between distinct values
    std::optional<detail::SplitCandidate> expected;
    for (int f = 0; f < 6; ++f) {
      std::vector<double> values;
      for (std::size_t i = 0; i < n; ++i) values.push_back(features[i][static_cast<std::size_t>(f)]);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t v = 0; v + 1 < values.size(); ++v) {
        const double threshold = values[v] + (values[v + 1] - values[v]) / 2.0;
        std::array<double, 2> left{}, right{};
        for (std::size_t i = 0; i < n; ++i) {
          auto& side = features[i][static_cast<std::size_t>(f)] <= threshold ? left : right;
          side[static_cast<std::size_t>(labels01[i])] += 1.0;
        }
        const double nl = left[0] + left[1];
        const double nr = right[0] + right[1];
        if (nl < 1 || nr < 1) continue;
        const double gini_l = 1.0 - (left[0] / nl) * (left[0] / nl) - (left[1] / nl) * (left[1] / nl);
        const double gini_r =
            1.0 - (right[0] / nr) * (right[0] / nr) - (right[1] / nr) * (right[1] / nr);
        const double weighted = (nl * gini_l + nr * gini_r) / static_cast<double>(n);
        if (!expected || weighted < expected->impurity) {
          expected = detail::SplitCandidate{f, threshold, weighted};
        }
      }
    }

    REQUIRE(split.has_value() == expected.has_value());
    if (split) {
      CHECK(split->impurity == doctest::Approx(expected->impurity).epsilon(1e-12));
      CHECK(split->feature == expected->feature);
      CHECK(split->threshold == doctest::Approx(expected->threshold));
    }
  }
}

TEST_CASE("model serialization") {
  const auto events = separable_events(80, 21);
  const ForestModel model = train_forest(events, quick_params(40));
  TempDir dir("forest_io");
  save_model(model, dir.file("model.json"));
  const ForestModel loaded = load_model(dir.file("model.json"));

  SUBCASE("round trip predicts identically on random events") {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
      const DrivingEvent ev = make_event(
          rng.range(0, 80), rng.range(-4000, 4000), false, rng.range(-20, 20),
          rng.range_int(0, 23), static_cast<WeatherCondition>(rng.range_int(0, 11)));
      const Vote a = predict(model, ev);
      const Vote b = predict(loaded, ev);
      CHECK(a.label == b.label);
      CHECK(a.vote_fraction == b.vote_fraction);
    }
    CHECK(loaded.oob_error == model.oob_error);
    CHECK(loaded.params.ntree == model.params.ntree);
  }
  SUBCASE("truncated file is corrupt") {
    const std::string text = read_file(dir.file("model.json"));
    std::ofstream out(dir.file("truncated.json"));
    out << text.substr(0, text.size() / 2);
    out.close();
    CHECK_THROWS_AS(load_model(dir.file("truncated.json")), CorruptModel);
  }
  SUBCASE("future schema version is rejected") {
    std::string text = read_file(dir.file("model.json"));
    const auto pos = text.find("\"schema_version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 18, "\"schema_version\":2");
    std::ofstream out(dir.file("future.json"));
    out << text;
    out.close();
    CHECK_THROWS_AS(load_model(dir.file("future.json")), VersionMismatch);
  }
  SUBCASE("missing file is a config error") {
    CHECK_THROWS_AS(load_model(dir.file("nope.json")), ConfigError);
  }
}

TEST_CASE("cross-validation") {
  SUBCASE("separable data pools to high accuracy") {
    const auto events = separable_events(200, 31);
    const EvaluationReport report = cross_validate(events, quick_params(100), 10, 5);
    CHECK(report.accuracy >= 0.95);
    CHECK(report.evaluated == 200);
  }
  SUBCASE("leave-one-out on a tiny set pools n predictions") {
    const auto events = separable_events(8, 13);
    const EvaluationReport report = cross_validate(events, quick_params(20), 8, 5);
    CHECK(report.evaluated == 8);
  }
  SUBCASE("too few samples") {
    const auto events = separable_events(5, 13);
    CHECK_THROWS_AS(cross_validate(events, quick_params(20), 10, 5), TooFewSamples);
  }
  SUBCASE("fold count must be sane") {
    const auto events = separable_events(20, 13);
    CHECK_THROWS_AS(cross_validate(events, quick_params(20), 1, 5), ConfigError);
  }
}
