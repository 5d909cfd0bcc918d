#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "ecodrive/metrics.hpp"
#include "ecodrive/rng.hpp"
#include "json.hpp"
#include "test_helpers.hpp"

using namespace ecodrive;

namespace {

std::vector<LabeledPrediction> confusion_fixture(int tp, int fp, int fn, int tn) {
  // positive class = Inefficient, hard 0/1 predictions
  std::vector<LabeledPrediction> out;
  for (int i = 0; i < tp; ++i) out.push_back({Label::Inefficient, Label::Inefficient, 1.0});
  for (int i = 0; i < fp; ++i) out.push_back({Label::Efficient, Label::Inefficient, 1.0});
  for (int i = 0; i < fn; ++i) out.push_back({Label::Inefficient, Label::Efficient, 1.0});
  for (int i = 0; i < tn; ++i) out.push_back({Label::Efficient, Label::Efficient, 1.0});
  return out;
}

}  // namespace

TEST_CASE("hand-computed confusion fixture") {
  const auto predictions = confusion_fixture(40, 10, 10, 40);
  const EvaluationReport report = compute_metrics(predictions);
  CHECK(report.accuracy == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(report.kappa == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(report.precision == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(report.recall == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(report.mean_absolute_error == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(report.root_mean_squared_error == doctest::Approx(0.4472135955).epsilon(1e-6));
  CHECK(report.confusion[1][1] == 40);
  CHECK(report.confusion[0][1] == 10);
  CHECK(report.confusion[1][0] == 10);
  CHECK(report.confusion[0][0] == 40);
  CHECK(report.evaluated == 100);
}

TEST_CASE("perfect classifier") {
  const auto predictions = confusion_fixture(50, 0, 0, 50);
  const EvaluationReport report = compute_metrics(predictions);
  CHECK(report.accuracy == 1.0);
  CHECK(report.kappa == doctest::Approx(1.0));
  CHECK(report.mean_absolute_error == 0.0);
  CHECK(report.root_mean_squared_error == 0.0);
  CHECK(report.relative_absolute_error == 0.0);
}

TEST_CASE("constant majority predictor on a balanced set") {
  // always predicts Efficient: fn=50, tn=50
  const auto predictions = confusion_fixture(0, 0, 50, 50);
  const EvaluationReport report = compute_metrics(predictions);
  CHECK(report.accuracy == doctest::Approx(0.5));
  CHECK(report.kappa == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.relative_absolute_error == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kappa of a chance predictor averages to zero") {
  Rng rng(123);
  double kappa_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledPrediction> predictions;
    for (int i = 0; i < 200; ++i) {
      const Label truth = rng.below(2) == 0 ? Label::Efficient : Label::Inefficient;
      const Label predicted = rng.below(2) == 0 ? Label::Efficient : Label::Inefficient;
      predictions.push_back({truth, predicted, 1.0});
    }
    kappa_sum += compute_metrics(predictions).kappa;
  }
  CHECK(std::fabs(kappa_sum / 100.0) < 0.05);
}

TEST_CASE("probabilistic predictions feed MAE and RMSE") {
  std::vector<LabeledPrediction> predictions = {
      {Label::Inefficient, Label::Inefficient, 0.9},  // p_pos 0.9, err 0.1
      {Label::Efficient, Label::Efficient, 0.8},      // p_pos 0.2, err 0.2
  };
  const EvaluationReport report = compute_metrics(predictions);
  CHECK(report.mean_absolute_error == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(report.root_mean_squared_error ==
        doctest::Approx(std::sqrt((0.01 + 0.04) / 2.0)).epsilon(1e-12));
}

TEST_CASE("metric guards") {
  CHECK_THROWS_AS(compute_metrics(std::vector<LabeledPrediction>{}), EmptyInput);
  std::vector<LabeledPrediction> unlabeled = {{Label::Unlabeled, Label::Efficient, 1.0}};
  CHECK_THROWS_AS(compute_metrics(unlabeled), DataError);

  // degenerate marginals: chance agreement is 1, kappa reported as 0
  const auto predictions = confusion_fixture(5, 0, 0, 0);
  CHECK(compute_metrics(predictions).kappa == 0.0);
}

TEST_CASE("evaluation report JSON carries all statistics fields") {
  const EvaluationReport report = compute_metrics(confusion_fixture(40, 10, 10, 40));
  std::ostringstream out;
  write_evaluation_json(out, report);
  const auto doc = nlohmann::json::parse(out.str());
  for (const char* field :
       {"accuracy", "kappa", "mean_absolute_error", "root_mean_squared_error",
        "relative_absolute_error", "root_relative_squared_error", "precision", "recall"}) {
    CHECK(doc.contains(field));
  }
  CHECK(doc.contains("confusion_matrix"));
  CHECK(doc["confusion_matrix"]["true_inefficient_pred_inefficient"] == 40);
}
