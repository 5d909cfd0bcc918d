#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>

#include "doctest.h"
#include "ecodrive/clustering.hpp"
#include "oracle_ward.hpp"
#include "test_helpers.hpp"

using namespace ecodrive;
using namespace testutil;

namespace {

FeatureVector one_dim(double x) { return FeatureVector{x, 0, 0, 0, 0, 0}; }

/// Canonical partition: set of sorted member sets, ignoring cluster ids.
std::set<std::vector<int>> canonical(const std::vector<int>& assignment) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    groups[assignment[i]].push_back(static_cast<int>(i));
  }
  std::set<std::vector<int>> out;
  for (auto& [id, members] : groups) out.insert(members);
  return out;
}

}  // namespace

TEST_CASE("standardize z-scores with sample stddev") {
  std::vector<FeatureVector> vectors = {one_dim(0.0), one_dim(10.0)};
  const auto [standardized, stats] = standardize(vectors);
  CHECK(stats.mean[0] == doctest::Approx(5.0));
  CHECK(stats.stddev[0] == doctest::Approx(7.0710678).epsilon(1e-6));
  CHECK(standardized[0][0] == doctest::Approx(-0.7071067811).epsilon(1e-9));
  CHECK(standardized[1][0] == doctest::Approx(0.7071067811).epsilon(1e-9));
  // constant dimensions map to zero
  for (std::size_t d = 1; d < 6; ++d) {
    CHECK(standardized[0][d] == 0.0);
    CHECK(stats.stddev[d] == 0.0);
  }
}

TEST_CASE("standardize guards and properties") {
  CHECK_THROWS_AS(standardize(std::vector<FeatureVector>{one_dim(1.0)}), InsufficientData);

  SUBCASE("identical vectors standardize to all zeros") {
    std::vector<FeatureVector> vectors(5, FeatureVector{3, 1, 4, 1, 5, 9});
    const auto [standardized, stats] = standardize(vectors);
    for (const auto& v : standardized) {
      for (double x : v) CHECK(x == 0.0);
    }
  }
  SUBCASE("each non-constant dim has mean 0 and stddev 1") {
    Rng rng(5);
    const auto vectors = random_vectors(rng, 40);
    const auto [standardized, stats] = standardize(vectors);
    for (std::size_t d = 0; d < 6; ++d) {
      double mean = 0.0;
      for (const auto& v : standardized) mean += v[d];
      mean /= static_cast<double>(standardized.size());
      double ss = 0.0;
      for (const auto& v : standardized) ss += (v[d] - mean) * (v[d] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(standardized.size() - 1));
      CHECK(std::fabs(mean) < 1e-9);
      CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("pairwise euclidean distance") {
  const FeatureVector a{0, 0, 0, 0, 0, 0};
  CHECK(pairwise_euclidean(a, a) == 0.0);
  CHECK(pairwise_euclidean(a, FeatureVector{3, 4, 0, 0, 0, 0}) == doctest::Approx(5.0));
  CHECK(pairwise_euclidean(FeatureVector{1, 1, 1, 1, 1, 1}, a) ==
        doctest::Approx(std::sqrt(6.0)).epsilon(1e-9));
}

TEST_CASE("ward merges nearest pair first") {
  std::vector<FeatureVector> points = {one_dim(0.0), one_dim(1.0), one_dim(10.0)};
  const Dendrogram d = ward_cluster(points);
  REQUIRE(d.merges.size() == 2);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[0].height == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.merges[0].size == 2);
  CHECK(d.merges[1].left == 2);
  CHECK(d.merges[1].right == 3);
  CHECK(d.merges[1].size == 3);

  // against the from-scratch reference
  const Dendrogram naive = naive_ward(points);
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK(d.merges[m].left == naive.merges[m].left);
    CHECK(d.merges[m].right == naive.merges[m].right);
    CHECK(d.merges[m].height == doctest::Approx(naive.merges[m].height).epsilon(1e-9));
  }
}

TEST_CASE("ward basics") {
  SUBCASE("identical points merge first at height zero") {
    std::vector<FeatureVector> points = {one_dim(5.0), one_dim(0.0), one_dim(5.0), one_dim(9.0)};
    const Dendrogram d = ward_cluster(points);
    CHECK(d.merges[0].left == 0);
    CHECK(d.merges[0].right == 2);
    CHECK(d.merges[0].height == 0.0);
  }
  SUBCASE("two points merge at their euclidean distance") {
    Rng rng(11);
    const FeatureVector a = random_vector(rng);
    const FeatureVector b = random_vector(rng);
    const Dendrogram d = ward_cluster(std::vector<FeatureVector>{a, b});
    REQUIRE(d.merges.size() == 1);
    CHECK(d.merges[0].height == doctest::Approx(pairwise_euclidean(a, b)).epsilon(1e-12));
  }
  SUBCASE("fewer than two vectors is an error") {
    CHECK_THROWS_AS(ward_cluster(std::vector<FeatureVector>{}), InsufficientData);
    CHECK_THROWS_AS(ward_cluster(std::vector<FeatureVector>{one_dim(1)}), InsufficientData);
  }
}

TEST_CASE("ward equals the naive reference on random instances") {
  Rng rng(2024);
  for (int instance = 0; instance < 25; ++instance) {
    const std::size_t n = 5 + rng.below(26);
    const auto points = random_vectors(rng, n);
    const Dendrogram mine = ward_cluster(points);
    const Dendrogram naive = naive_ward(points);
    REQUIRE(mine.merges.size() == naive.merges.size());
    for (std::size_t m = 0; m < mine.merges.size(); ++m) {
      CHECK(mine.merges[m].left == naive.merges[m].left);
      CHECK(mine.merges[m].right == naive.merges[m].right);
      const double expected = naive.merges[m].height;
      CHECK(mine.merges[m].height ==
            doctest::Approx(expected).epsilon(1e-9).scale(std::max(1.0, expected)));
    }
    for (int k = 1; k <= static_cast<int>(n); ++k) {
      CHECK(cut_dendrogram_k(mine, k) == cut_dendrogram_k(naive, k));
    }
  }
}

TEST_CASE("ward heights are non-decreasing") {
  Rng rng(31337);
  for (int instance = 0; instance < 10; ++instance) {
    const auto points = random_vectors(rng, 30);
    const Dendrogram d = ward_cluster(points);
    for (std::size_t m = 1; m < d.merges.size(); ++m) {
      CHECK(d.merges[m].height >= d.merges[m - 1].height);
    }
  }
}

TEST_CASE("permuting input order leaves flat partitions unchanged") {
  Rng rng(7);
  const auto points = random_vectors(rng, 24);
  std::vector<std::size_t> perm(points.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<FeatureVector> shuffled(points.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = points[perm[i]];

  const Dendrogram base = ward_cluster(points);
  const Dendrogram permuted = ward_cluster(shuffled);
  for (int k = 1; k <= static_cast<int>(points.size()); ++k) {
    const auto a = cut_dendrogram_k(base, k);
    const auto b = cut_dendrogram_k(permuted, k);
    // map permuted assignment back to original indexing before comparing
    std::vector<int> b_unpermuted(points.size());
    for (std::size_t i = 0; i < perm.size(); ++i) b_unpermuted[perm[i]] = b[i];
    CHECK(canonical(a) == canonical(b_unpermuted));
  }
}

TEST_CASE("cut_dendrogram") {
  std::vector<FeatureVector> points = {one_dim(0.0), one_dim(1.0), one_dim(10.0)};
  const Dendrogram d = ward_cluster(points);

  SUBCASE("k equal to n puts every point alone") {
    CHECK(cut_dendrogram_k(d, 3) == std::vector<int>{1, 2, 3});
  }
  SUBCASE("k of one is a single cluster") {
    CHECK(cut_dendrogram_k(d, 1) == std::vector<int>{1, 1, 1});
  }
  SUBCASE("k of two separates the far point") {
    CHECK(cut_dendrogram_k(d, 2) == std::vector<int>{1, 1, 2});
  }
  SUBCASE("invalid k") {
    CHECK_THROWS_AS(cut_dendrogram_k(d, 0), InvalidK);
    CHECK_THROWS_AS(cut_dendrogram_k(d, 4), InvalidK);
    CHECK_THROWS_AS(cut_dendrogram_height(d, -1.0), InvalidK);
  }
  SUBCASE("height cut applies merges at or below the threshold") {
    CHECK(cut_dendrogram_height(d, 0.5) == std::vector<int>{1, 2, 3});
    CHECK(cut_dendrogram_height(d, 1.0) == std::vector<int>{1, 1, 2});
    CHECK(cut_dendrogram_height(d, 1000.0) == std::vector<int>{1, 1, 1});
  }
  SUBCASE("every cut is a partition with exactly k clusters") {
    Rng rng(17);
    const auto random_points = random_vectors(rng, 20);
    const Dendrogram rd = ward_cluster(random_points);
    for (int k = 1; k <= 20; ++k) {
      const auto assignment = cut_dendrogram_k(rd, k);
      std::set<int> ids(assignment.begin(), assignment.end());
      CHECK(static_cast<int>(ids.size()) == k);
      CHECK(*ids.begin() == 1);
      CHECK(*ids.rbegin() == k);
    }
  }
}

TEST_CASE("summarize_cluster") {
  SUBCASE("an all-idling cluster") {
    std::vector<DrivingEvent> members;
    for (int i = 0; i < 4; ++i) {
      DrivingEvent ev = make_event(0.0, 0.0, true, 0.0, 0, WeatherCondition::PartlyCloudy);
      ev.distance = 0.0;
      ev.fuel_consumed = 0.05;
      ev.fuel_mileage = 5.28;  // stands in for low measured economies
      members.push_back(ev);
    }
    const ClusterSummary s = summarize_cluster(members);
    CHECK(s.n_members == 4);
    CHECK(s.mean_speed == 0.0);
    CHECK(s.mean_acceleration == 0.0);
    CHECK(s.is_idling_mode == 1);
    CHECK(s.hour_mode == 0);
    CHECK(s.weather_mode == WeatherCondition::PartlyCloudy);
    CHECK(s.mean_fuel_economy == doctest::Approx(5.28));
  }
  SUBCASE("single member echoes itself") {
    const DrivingEvent ev = make_event(61.12, 273.0, false, -0.96, 0, WeatherCondition::Cloudy,
                                       1.0, 1.0 / 29.57);
    const ClusterSummary s = summarize_cluster(std::vector<DrivingEvent>{ev});
    CHECK(s.n_members == 1);
    CHECK(s.mean_speed == doctest::Approx(61.12));
    CHECK(s.mean_fuel_economy == doctest::Approx(29.57).epsilon(1e-6));
  }
  SUBCASE("hour mode is the majority, ties to the smallest") {
    std::vector<DrivingEvent> members = {
        make_event(10, 0, false, 0, 23, WeatherCondition::Clear),
        make_event(10, 0, false, 0, 23, WeatherCondition::Clear),
        make_event(10, 0, false, 0, 0, WeatherCondition::Mist)};
    CHECK(summarize_cluster(members).hour_mode == 23);
    members.pop_back();
    members.push_back(make_event(10, 0, false, 0, 0, WeatherCondition::Mist));
    members.push_back(make_event(10, 0, false, 0, 0, WeatherCondition::Mist));
    // 2 x hour 23, 2 x hour 0 -> smallest wins
    CHECK(summarize_cluster(members).hour_mode == 0);
  }
  SUBCASE("mileages are capped and empty economies read 0") {
    std::vector<DrivingEvent> members = {make_event(60, 0, false, 0, 12, WeatherCondition::Clear,
                                                    2.0, 1e-9)};
    CHECK(summarize_cluster(members).mean_fuel_economy == doctest::Approx(kMileageCap));
    members[0].fuel_consumed = 0.0;
    members[0].fuel_mileage.reset();
    CHECK(summarize_cluster(members).mean_fuel_economy == 0.0);
  }
}

TEST_CASE("label_clusters applies the first matching rule") {
  const LabelRuleConfig rules = LabelRuleConfig::defaults();
  std::vector<ClusterSummary> summaries(3);
  // idling cluster, low economy
  summaries[0].journey_id = "J0001";
  summaries[0].cluster_id = 1;
  summaries[0].is_idling_mode = 1;
  summaries[0].hour_mode = 0;
  summaries[0].weather_mode = WeatherCondition::PartlyCloudy;
  summaries[0].mean_fuel_economy = 5.28;
  // fast cruising, benign weather, off-peak, economy below the floor
  summaries[1].journey_id = "J0001";
  summaries[1].cluster_id = 2;
  summaries[1].mean_speed = 61.12;
  summaries[1].hour_mode = 0;
  summaries[1].weather_mode = WeatherCondition::PartlyCloudy;
  summaries[1].mean_fuel_economy = 29.57;
  // slow crawl in the evening peak: excused by traffic
  summaries[2].journey_id = "J0001";
  summaries[2].cluster_id = 3;
  summaries[2].mean_speed = 6.86;
  summaries[2].hour_mode = 17;
  summaries[2].weather_mode = WeatherCondition::Clear;
  summaries[2].mean_fuel_economy = 11.44;

  label_clusters(summaries, rules);
  CHECK(summaries[0].label == Label::Inefficient);
  CHECK(summaries[1].label == Label::Inefficient);
  CHECK(summaries[2].label == Label::Efficient);

  SUBCASE("labeling is idempotent") {
    auto again = summaries;
    label_clusters(again, rules);
    for (std::size_t i = 0; i < summaries.size(); ++i) CHECK(again[i].label == summaries[i].label);
  }
  SUBCASE("manual overrides win") {
    OverrideMap overrides;
    overrides[{"J0001", 3}] = Label::Inefficient;
    label_clusters(summaries, rules, overrides);
    CHECK(summaries[2].label == Label::Inefficient);
  }
  SUBCASE("a config without a catch-all leaves unmatched summaries Unlabeled") {
    LabelRuleConfig narrow;
    narrow.rules.push_back(LabelRule{Label::Inefficient, {{"is_idling_mode", RuleOp::Eq, {1.0}}}});
    label_clusters(summaries, narrow);
    CHECK(summaries[0].label == Label::Inefficient);
    CHECK(summaries[1].label == Label::Unlabeled);
    CHECK(summaries[2].label == Label::Unlabeled);
  }
}

TEST_CASE("label rule config validation and round trip") {
  TempDir dir("label_rules");
  const LabelRuleConfig defaults = LabelRuleConfig::defaults();
  defaults.save(dir.file("rules.json"));
  const LabelRuleConfig loaded = LabelRuleConfig::load(dir.file("rules.json"));
  REQUIRE(loaded.rules.size() == defaults.rules.size());
  CHECK(loaded.rules[0].label == Label::Inefficient);
  CHECK(loaded.rules[0].when[0].field == "is_idling_mode");

  SUBCASE("unknown field") {
    LabelRuleConfig bad;
    bad.rules.push_back(LabelRule{Label::Efficient, {{"warp_factor", RuleOp::Eq, {1.0}}}});
    std::vector<ClusterSummary> summaries(1);
    CHECK_THROWS_AS(label_clusters(summaries, bad), ConfigError);
  }
  SUBCASE("wrong arity") {
    LabelRuleConfig bad;
    bad.rules.push_back(LabelRule{Label::Efficient, {{"mean_speed", RuleOp::Lt, {}}}});
    std::vector<ClusterSummary> summaries(1);
    CHECK_THROWS_AS(label_clusters(summaries, bad), ConfigError);
  }
  SUBCASE("rules may not assign Unlabeled") {
    LabelRuleConfig bad;
    bad.rules.push_back(LabelRule{Label::Unlabeled, {}});
    std::vector<ClusterSummary> summaries(1);
    CHECK_THROWS_AS(label_clusters(summaries, bad), ConfigError);
  }
  SUBCASE("malformed override lines") {
    TempDir override_dir("overrides");
    {
      std::ofstream out(override_dir.file("bad.csv"));
      out << "J0001,notanumber,Efficient\n";
    }
    CHECK_THROWS_AS(load_overrides(override_dir.file("bad.csv")), ConfigError);
  }
}

TEST_CASE("cluster_journey") {
  SUBCASE("below min_events is skipped with a warning") {
    std::vector<DrivingEvent> events;
    for (int i = 0; i < 4; ++i) {
      events.push_back(make_event(40.0 + i, 0, false, 0, 12, WeatherCondition::Clear));
    }
    ClusterParams params;
    const auto result = cluster_journey(events, params, LabelRuleConfig::defaults());
    CHECK(result.skipped);
    CHECK(result.warning.find("J0001") != std::string::npos);
    for (const DrivingEvent& ev : events) CHECK(ev.label == Label::Unlabeled);
  }
  SUBCASE("identical events collapse to height-zero merges") {
    std::vector<DrivingEvent> events(12, make_event(50.0, 0, false, 0, 12,
                                                    WeatherCondition::Clear));
    ClusterParams params;
    params.k = 5;
    const auto result = cluster_journey(events, params, LabelRuleConfig::defaults());
    CHECK(!result.skipped);
    // nominally 5 clusters, but every summary is the same event over again
    for (const ClusterSummary& s : result.summaries) {
      CHECK(s.mean_speed == doctest::Approx(50.0));
      CHECK(s.label == result.summaries[0].label);
    }
  }
  SUBCASE("labels propagate from cluster summaries to events") {
    std::vector<DrivingEvent> events;
    for (int i = 0; i < 10; ++i) {
      events.push_back(make_event(0.0, 0.0, true, 0.0, 0, WeatherCondition::PartlyCloudy, 0.0,
                                  0.05));
    }
    for (int i = 0; i < 10; ++i) {
      events.push_back(
          make_event(55.0, 5.0, false, 0.0, 22, WeatherCondition::Clear, 1.0, 0.02));  // 50 km/L
    }
    ClusterParams params;
    params.k = 2;
    const auto result = cluster_journey(events, params, LabelRuleConfig::defaults());
    REQUIRE(!result.skipped);
    for (int i = 0; i < 10; ++i) CHECK(events[static_cast<std::size_t>(i)].label == Label::Inefficient);
    for (int i = 10; i < 20; ++i) CHECK(events[static_cast<std::size_t>(i)].label == Label::Efficient);
  }
}
