#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecodrive/clustering.hpp"
#include "ecodrive/metrics.hpp"
#include "ecodrive/telemetry.hpp"

namespace ecodrive {

struct ForestParams {
  int ntree = 500;
  int mtry = 3;          // features drawn per split, 1..6
  int min_leaf = 1;
  int max_depth = 0;     // 0 = unlimited
  std::uint64_t seed = 0;
};

/// Binary split node; feature < 0 marks a leaf carrying class counts
/// [Efficient, Inefficient]. Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::int64_t, 2> counts{0, 0};
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  /// Leaf vote; count ties go to Inefficient.
  Label predict(const FeatureVector& x) const;
};

struct ForestModel {
  int schema_version = 1;
  ForestParams params;
  std::vector<std::string> feature_order;  // must match kFeatureNames
  std::vector<DecisionTree> trees;
  double oob_error = 0.0;
  std::int64_t training_size = 0;
};

struct Vote {
  Label label = Label::Unlabeled;
  double vote_fraction = 0.0;  // winning votes / ntree
};

/// Bootstrap sample for one tree; this is the exact sequence training uses
/// (the tree's RNG stream draws the bootstrap before anything else).
std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index,
                                           std::size_t n);

/// Grows params.ntree trees on bootstrap samples, drawing mtry features
/// without replacement per node and splitting on minimum weighted Gini
/// impurity. Deterministic in (events, params): each tree's RNG stream is
/// derived from (seed, tree index). The OOB estimate comes from majority
/// votes of trees that did not see each sample.
ForestModel train_forest(std::span<const DrivingEvent> events, const ForestParams& params,
                         const SeverityMap& severity = SeverityMap{});

/// Same contract on pre-extracted feature rows; labels must be binary.
ForestModel train_forest_features(std::span<const FeatureVector> features,
                                  std::span<const Label> labels, const ForestParams& params);

/// Majority vote across trees; ties go to Inefficient (a false alert costs an
/// advisory message, a false pass costs fuel).
Vote predict(const ForestModel& model, const DrivingEvent& event,
             const SeverityMap& severity = SeverityMap{});
Vote predict_features(const ForestModel& model, const FeatureVector& features);

void save_model(const ForestModel& model, const std::string& path);
ForestModel load_model(const std::string& path);

/// Stratified k-fold cross-validation; per-fold forests get independent
/// derived seeds and held-out predictions are pooled into one report.
EvaluationReport cross_validate(std::span<const DrivingEvent> events, const ForestParams& params,
                                int folds, std::uint64_t seed,
                                const SeverityMap& severity = SeverityMap{});

namespace detail {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted Gini after the split
};

/// Best split over the given features, thresholds at midpoints between
/// consecutive distinct values; children must each keep min_leaf samples.
/// Ties prefer the lower feature index, then the lower threshold.
std::optional<SplitCandidate> find_best_split(std::span<const FeatureVector> features,
                                              std::span<const int> labels01,
                                              std::span<const std::size_t> node_samples,
                                              std::span<const int> candidate_features,
                                              int min_leaf);

}  // namespace detail

}  // namespace ecodrive
