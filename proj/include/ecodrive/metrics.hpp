#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "ecodrive/telemetry.hpp"

namespace ecodrive {

struct LabeledPrediction {
  Label truth = Label::Unlabeled;
  Label predicted = Label::Unlabeled;
  double predicted_prob = 1.0;  // probability assigned to `predicted`
};

/// Classification statistics. Errors treat Inefficient as the positive class;
/// RAE/RRSE are ratios against the base-rate predictor (1.0 == 100%).
struct EvaluationReport {
  double accuracy = 0.0;
  double kappa = 0.0;
  double mean_absolute_error = 0.0;
  double root_mean_squared_error = 0.0;
  double relative_absolute_error = 0.0;
  double root_relative_squared_error = 0.0;
  double precision = 0.0;  // weighted by class support
  double recall = 0.0;     // weighted by class support
  std::array<std::array<std::int64_t, 2>, 2> confusion{};  // [true][pred], 0=Efficient
  std::int64_t evaluated = 0;
};

/// Kappa uses chance agreement from the marginal products; when chance
/// agreement is 1 (degenerate marginals) kappa is reported as 0.
EvaluationReport compute_metrics(std::span<const LabeledPrediction> predictions);

void write_evaluation_json(std::ostream& out, const EvaluationReport& report);
void write_evaluation_json_file(const std::string& path, const EvaluationReport& report);

}  // namespace ecodrive
