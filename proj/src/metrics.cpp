#include "ecodrive/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace ecodrive {

namespace {

double safe_ratio(double numerator, double denominator) {
  if (denominator == 0.0) {
    return numerator == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return numerator / denominator;
}

}  // namespace

EvaluationReport compute_metrics(std::span<const LabeledPrediction> predictions) {
  if (predictions.empty()) throw EmptyInput("compute_metrics needs at least one prediction");

  EvaluationReport report;
  report.evaluated = static_cast<std::int64_t>(predictions.size());

  double abs_error_sum = 0.0;
  double sq_error_sum = 0.0;
  double positive_rate_sum = 0.0;

  for (const LabeledPrediction& p : predictions) {
    if (p.truth == Label::Unlabeled || p.predicted == Label::Unlabeled) {
      throw DataError("compute_metrics requires binary labels");
    }
    const int t = p.truth == Label::Inefficient ? 1 : 0;
    const int pr = p.predicted == Label::Inefficient ? 1 : 0;
    ++report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(pr)];

    // Probability of the positive (Inefficient) class.
    const double p_pos = pr == 1 ? p.predicted_prob : 1.0 - p.predicted_prob;
    const double err = static_cast<double>(t) - p_pos;
    abs_error_sum += std::fabs(err);
    sq_error_sum += err * err;
    positive_rate_sum += static_cast<double>(t);
  }

  const double n = static_cast<double>(report.evaluated);
  const auto& cm = report.confusion;
  const double correct = static_cast<double>(cm[0][0] + cm[1][1]);
  report.accuracy = correct / n;

  // Chance agreement from the marginal products.
  const double true0 = static_cast<double>(cm[0][0] + cm[0][1]);
  const double true1 = static_cast<double>(cm[1][0] + cm[1][1]);
  const double pred0 = static_cast<double>(cm[0][0] + cm[1][0]);
  const double pred1 = static_cast<double>(cm[0][1] + cm[1][1]);
  const double p_e = (true0 * pred0 + true1 * pred1) / (n * n);
  report.kappa = p_e >= 1.0 ? 0.0 : (report.accuracy - p_e) / (1.0 - p_e);

  report.mean_absolute_error = abs_error_sum / n;
  report.root_mean_squared_error = std::sqrt(sq_error_sum / n);

  // Base-rate predictor: always outputs the positive-class rate.
  const double base_rate = positive_rate_sum / n;
  double base_abs_sum = 0.0;
  double base_sq_sum = 0.0;
  for (const LabeledPrediction& p : predictions) {
    const double t = p.truth == Label::Inefficient ? 1.0 : 0.0;
    base_abs_sum += std::fabs(t - base_rate);
    base_sq_sum += (t - base_rate) * (t - base_rate);
  }
  report.relative_absolute_error = safe_ratio(abs_error_sum, base_abs_sum);
  report.root_relative_squared_error =
      safe_ratio(report.root_mean_squared_error, std::sqrt(base_sq_sum / n));

  // Per-class precision/recall, weighted by true-class support. A class that
  // is never predicted contributes precision 0.
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double support = static_cast<double>(cm[static_cast<std::size_t>(c)][0] +
                                               cm[static_cast<std::size_t>(c)][1]);
    const double predicted_c = static_cast<double>(cm[0][static_cast<std::size_t>(c)] +
                                                   cm[1][static_cast<std::size_t>(c)]);
    const double tp =
        static_cast<double>(cm[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    const double precision_c = predicted_c > 0.0 ? tp / predicted_c : 0.0;
    const double recall_c = support > 0.0 ? tp / support : 0.0;
    weighted_precision += support * precision_c;
    weighted_recall += support * recall_c;
  }
  report.precision = weighted_precision / n;
  report.recall = weighted_recall / n;
  return report;
}

namespace {

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["kappa"] = report.kappa;
  j["mean_absolute_error"] = report.mean_absolute_error;
  j["root_mean_squared_error"] = report.root_mean_squared_error;
  j["relative_absolute_error"] = report.relative_absolute_error;
  j["root_relative_squared_error"] = report.root_relative_squared_error;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["confusion_matrix"] = {
      {"true_efficient_pred_efficient", report.confusion[0][0]},
      {"true_efficient_pred_inefficient", report.confusion[0][1]},
      {"true_inefficient_pred_efficient", report.confusion[1][0]},
      {"true_inefficient_pred_inefficient", report.confusion[1][1]},
  };
  j["evaluated"] = report.evaluated;
  return j;
}

}  // namespace

void write_evaluation_json(std::ostream& out, const EvaluationReport& report) {
  out << report_to_json(report).dump(2) << '\n';
}

void write_evaluation_json_file(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write evaluation file: " + path);
  write_evaluation_json(out, report);
}

}  // namespace ecodrive
