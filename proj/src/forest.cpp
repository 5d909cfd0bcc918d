#include "ecodrive/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ecodrive/rng.hpp"
#include "json.hpp"

namespace ecodrive {

Label DecisionTree::predict(const FeatureVector& x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const TreeNode& split = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(split.feature)] <= split.threshold
                                        ? split.left
                                        : split.right);
  }
  const auto& counts = nodes[node].counts;
  return counts[1] >= counts[0] ? Label::Inefficient : Label::Efficient;
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index,
                                           std::size_t n) {
  Rng rng(derive_seed(forest_seed, static_cast<std::uint64_t>(tree_index)));
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = rng.below(n);
  return indices;
}

namespace detail {

std::optional<SplitCandidate> find_best_split(std::span<const FeatureVector> features,
                                              std::span<const int> labels01,
                                              std::span<const std::size_t> node_samples,
                                              std::span<const int> candidate_features,
                                              int min_leaf) {
  const std::size_t n = node_samples.size();
  if (n < 2 * static_cast<std::size_t>(min_leaf)) return std::nullopt;

  std::optional<SplitCandidate> best;
  std::vector<std::size_t> order(node_samples.begin(), node_samples.end());

  for (const int feature : candidate_features) {
    const auto value_of = [&](std::size_t sample) {
      return features[sample][static_cast<std::size_t>(feature)];
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (value_of(a) != value_of(b)) return value_of(a) < value_of(b);
      return a < b;
    });

    std::array<double, 2> left{0.0, 0.0};
    std::array<double, 2> right{0.0, 0.0};
    for (const std::size_t sample : order) {
      right[static_cast<std::size_t>(labels01[sample])] += 1.0;
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t sample = order[i];
      left[static_cast<std::size_t>(labels01[sample])] += 1.0;
      right[static_cast<std::size_t>(labels01[sample])] -= 1.0;

      const double a = value_of(order[i]);
      const double b = value_of(order[i + 1]);
      if (a == b) continue;  // threshold only between distinct values

      const double nl = static_cast<double>(i + 1);
      const double nr = static_cast<double>(n - i - 1);
      if (nl < min_leaf || nr < min_leaf) continue;

      double threshold = a + (b - a) / 2.0;
      if (!(threshold > a)) threshold = a;  // adjacent doubles collapse the midpoint
      if (threshold >= b) continue;

      const double gini_l = 1.0 - (left[0] / nl) * (left[0] / nl) - (left[1] / nl) * (left[1] / nl);
      const double gini_r =
          1.0 - (right[0] / nr) * (right[0] / nr) - (right[1] / nr) * (right[1] / nr);
      const double weighted = (nl * gini_l + nr * gini_r) / static_cast<double>(n);

      // Strict improvement keeps the tie-break at (lowest feature, lowest threshold)
      // because features and thresholds are scanned in ascending order.
      if (!best || weighted < best->impurity) {
        best = SplitCandidate{feature, threshold, weighted};
      }
    }
  }
  return best;
}

}  // namespace detail

namespace {

bool node_is_pure(std::span<const int> labels01, std::span<const std::size_t> samples) {
  const int first = labels01[samples.front()];
  return std::all_of(samples.begin(), samples.end(),
                     [&](std::size_t s) { return labels01[s] == first; });
}

int grow_node(DecisionTree& tree, std::span<const FeatureVector> features,
              std::span<const int> labels01, std::vector<std::size_t>& samples, std::size_t begin,
              std::size_t end, int depth, const ForestParams& params, Rng& rng) {
  const std::span<const std::size_t> node_samples(samples.data() + begin, end - begin);

  const auto make_leaf = [&] {
    TreeNode leaf;
    for (const std::size_t s : node_samples) {
      ++leaf.counts[static_cast<std::size_t>(labels01[s])];
    }
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size() - 1);
  };

  const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
  if (node_samples.size() < 2 * static_cast<std::size_t>(params.min_leaf) || depth_capped ||
      node_is_pure(labels01, node_samples)) {
    return make_leaf();
  }

  // mtry features without replacement, evaluated in ascending order.
  std::array<int, 6> pool = {0, 1, 2, 3, 4, 5};
  const int mtry = std::min(params.mtry, 6);
  for (int i = 0; i < mtry; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(6 - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  std::array<int, 6> chosen{};
  std::copy_n(pool.begin(), mtry, chosen.begin());
  std::sort(chosen.begin(), chosen.begin() + mtry);

  const auto split = detail::find_best_split(
      features, labels01, node_samples,
      std::span<const int>(chosen.data(), static_cast<std::size_t>(mtry)), params.min_leaf);
  if (!split) return make_leaf();

  const auto mid_it = std::stable_partition(
      samples.begin() + static_cast<std::ptrdiff_t>(begin),
      samples.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t s) {
        return features[s][static_cast<std::size_t>(split->feature)] <= split->threshold;
      });
  const std::size_t mid = static_cast<std::size_t>(mid_it - samples.begin());
  if (mid == begin || mid == end) return make_leaf();  // degenerate split

  const int node_index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{split->feature, split->threshold, -1, -1, {0, 0}});
  const int left = grow_node(tree, features, labels01, samples, begin, mid, depth + 1, params, rng);
  const int right = grow_node(tree, features, labels01, samples, mid, end, depth + 1, params, rng);
  tree.nodes[static_cast<std::size_t>(node_index)].left = left;
  tree.nodes[static_cast<std::size_t>(node_index)].right = right;
  return node_index;
}

void validate_params(const ForestParams& params) {
  if (params.ntree < 1) throw ConfigError("ntree must be >= 1");
  if (params.mtry < 1 || params.mtry > 6) throw ConfigError("mtry must be within 1..6");
  if (params.min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
  if (params.max_depth < 0) throw ConfigError("max_depth must be >= 0");
}

std::vector<std::string> canonical_feature_order() {
  return std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
}

}  // namespace

ForestModel train_forest_features(std::span<const FeatureVector> features,
                                  std::span<const Label> labels, const ForestParams& params) {
  validate_params(params);
  const std::size_t n = features.size();
  if (n == 0) throw EmptyInput("train_forest needs at least one event");
  if (labels.size() != n) throw LengthMismatch("features/labels size mismatch");

  std::vector<int> labels01(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == Label::Unlabeled) {
      throw UnlabeledData("training event " + std::to_string(i) + " is unlabeled");
    }
    labels01[i] = labels[i] == Label::Inefficient ? 1 : 0;
  }
  const long positives = std::count(labels01.begin(), labels01.end(), 1);
  if (positives == 0 || positives == static_cast<long>(n)) {
    throw SingleClassData("training data contains a single class");
  }

  ForestModel model;
  model.params = params;
  model.feature_order = canonical_feature_order();
  model.training_size = static_cast<std::int64_t>(n);
  model.trees.resize(static_cast<std::size_t>(params.ntree));

  std::vector<std::array<std::int64_t, 2>> oob_votes(n, {0, 0});
  for (int t = 0; t < params.ntree; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> bag(n);
    std::vector<bool> in_bag(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      bag[i] = rng.below(n);
      in_bag[bag[i]] = true;
    }

    DecisionTree& tree = model.trees[static_cast<std::size_t>(t)];
    grow_node(tree, features, std::span<const int>(labels01), bag, 0, n, 0, params, rng);

    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      const Label vote = tree.predict(features[i]);
      ++oob_votes[i][vote == Label::Inefficient ? 1 : 0];
    }
  }

  std::int64_t voted = 0, wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& votes = oob_votes[i];
    if (votes[0] + votes[1] == 0) continue;
    ++voted;
    const int predicted = votes[1] >= votes[0] ? 1 : 0;  // ties to Inefficient
    if (predicted != labels01[i]) ++wrong;
  }
  model.oob_error = voted > 0 ? static_cast<double>(wrong) / static_cast<double>(voted) : 0.0;
  return model;
}

ForestModel train_forest(std::span<const DrivingEvent> events, const ForestParams& params,
                         const SeverityMap& severity) {
  std::vector<FeatureVector> features;
  std::vector<Label> labels;
  features.reserve(events.size());
  labels.reserve(events.size());
  for (const DrivingEvent& ev : events) {
    features.push_back(event_features(ev, severity));
    labels.push_back(ev.label);
  }
  return train_forest_features(features, labels, params);
}

Vote predict_features(const ForestModel& model, const FeatureVector& features) {
  if (model.feature_order != canonical_feature_order()) {
    throw SchemaMismatch("model feature order does not match the 6-dim feature contract");
  }
  if (model.trees.empty()) throw CorruptModel("model has no trees");
  std::int64_t inefficient = 0;
  for (const DecisionTree& tree : model.trees) {
    if (tree.predict(features) == Label::Inefficient) ++inefficient;
  }
  const std::int64_t total = static_cast<std::int64_t>(model.trees.size());
  const std::int64_t efficient = total - inefficient;
  Vote vote;
  vote.label = inefficient >= efficient ? Label::Inefficient : Label::Efficient;
  vote.vote_fraction =
      static_cast<double>(std::max(inefficient, efficient)) / static_cast<double>(total);
  return vote;
}

Vote predict(const ForestModel& model, const DrivingEvent& event, const SeverityMap& severity) {
  return predict_features(model, event_features(event, severity));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::ordered_json tree_to_json(const DecisionTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const TreeNode& node : tree.nodes) {
    if (node.feature >= 0) {
      nodes.push_back({{"f", node.feature},
                       {"t", node.threshold},
                       {"l", node.left},
                       {"r", node.right}});
    } else {
      nodes.push_back({{"c", {node.counts[0], node.counts[1]}}});
    }
  }
  return nodes;
}

DecisionTree tree_from_json(const nlohmann::json& nodes_json) {
  DecisionTree tree;
  if (!nodes_json.is_array() || nodes_json.empty()) {
    throw CorruptModel("tree node list missing or empty");
  }
  const int node_count = static_cast<int>(nodes_json.size());
  for (const auto& node_json : nodes_json) {
    TreeNode node;
    if (node_json.contains("f")) {
      node.feature = node_json.at("f").get<int>();
      node.threshold = node_json.at("t").get<double>();
      node.left = node_json.at("l").get<int>();
      node.right = node_json.at("r").get<int>();
      if (node.feature < 0 || node.feature >= 6 || node.left < 0 || node.left >= node_count ||
          node.right < 0 || node.right >= node_count) {
        throw CorruptModel("tree split node out of bounds");
      }
    } else {
      const auto counts = node_json.at("c").get<std::vector<std::int64_t>>();
      if (counts.size() != 2 || counts[0] < 0 || counts[1] < 0 || counts[0] + counts[1] == 0) {
        throw CorruptModel("tree leaf counts invalid");
      }
      node.counts = {counts[0], counts[1]};
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

void save_model(const ForestModel& model, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = model.schema_version;
  doc["params"] = {{"ntree", model.params.ntree},
                   {"mtry", model.params.mtry},
                   {"min_leaf", model.params.min_leaf},
                   {"max_depth", model.params.max_depth},
                   {"seed", model.params.seed}};
  doc["feature_order"] = model.feature_order;
  doc["oob_error"] = model.oob_error;
  doc["training_size"] = model.training_size;
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const DecisionTree& tree : model.trees) trees.push_back(tree_to_json(tree));
  doc["trees"] = std::move(trees);

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file: " + path);
  out << doc.dump() << '\n';
}

ForestModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw CorruptModel("model file is not valid JSON");

  if (!doc.contains("schema_version") || !doc.at("schema_version").is_number_integer()) {
    throw CorruptModel("model file has no schema_version");
  }
  const int version = doc.at("schema_version").get<int>();
  if (version != 1) {
    throw VersionMismatch("model schema_version " + std::to_string(version) +
                          " is not supported (expected 1)");
  }

  ForestModel model;
  try {
    model.schema_version = version;
    const auto& params = doc.at("params");
    model.params.ntree = params.at("ntree").get<int>();
    model.params.mtry = params.at("mtry").get<int>();
    model.params.min_leaf = params.at("min_leaf").get<int>();
    model.params.max_depth = params.at("max_depth").get<int>();
    model.params.seed = params.at("seed").get<std::uint64_t>();
    model.feature_order = doc.at("feature_order").get<std::vector<std::string>>();
    model.oob_error = doc.at("oob_error").get<double>();
    model.training_size = doc.at("training_size").get<std::int64_t>();
    for (const auto& tree_json : doc.at("trees")) {
      model.trees.push_back(tree_from_json(tree_json));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel(std::string("model file is malformed: ") + e.what());
  }
  if (model.feature_order != canonical_feature_order()) {
    throw SchemaMismatch("model feature order does not match the 6-dim feature contract");
  }
  if (model.trees.empty()) throw CorruptModel("model has no trees");
  return model;
}

EvaluationReport cross_validate(std::span<const DrivingEvent> events, const ForestParams& params,
                                int folds, std::uint64_t seed, const SeverityMap& severity) {
  validate_params(params);
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  const std::size_t n = events.size();
  if (n < static_cast<std::size_t>(folds)) {
    throw TooFewSamples("cross-validation needs at least " + std::to_string(folds) +
                        " events, got " + std::to_string(n));
  }

  std::vector<FeatureVector> features;
  std::vector<Label> labels;
  features.reserve(n);
  labels.reserve(n);
  for (const DrivingEvent& ev : events) {
    features.push_back(event_features(ev, severity));
    labels.push_back(ev.label);
  }

  // Stratified folds: shuffle within each class, deal round-robin.
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == Label::Unlabeled) {
      throw UnlabeledData("cross-validation event " + std::to_string(i) + " is unlabeled");
    }
    by_class[labels[i] == Label::Inefficient ? 1 : 0].push_back(i);
  }
  std::vector<int> fold_of(n, 0);
  for (int c = 0; c < 2; ++c) {
    auto& members = by_class[c];
    Rng rng(derive_seed(seed, 101 + static_cast<std::uint64_t>(c)));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      fold_of[members[j]] = static_cast<int>(j % static_cast<std::size_t>(folds));
    }
  }

  std::vector<LabeledPrediction> pooled;
  pooled.reserve(n);
  for (int f = 0; f < folds; ++f) {
    std::vector<FeatureVector> train_x;
    std::vector<Label> train_y;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        held_out.push_back(i);
      } else {
        train_x.push_back(features[i]);
        train_y.push_back(labels[i]);
      }
    }
    if (held_out.empty()) continue;

    ForestParams fold_params = params;
    fold_params.seed = derive_seed(seed, 200 + static_cast<std::uint64_t>(f));
    const ForestModel model = train_forest_features(train_x, train_y, fold_params);
    for (const std::size_t i : held_out) {
      const Vote vote = predict_features(model, features[i]);
      pooled.push_back(LabeledPrediction{labels[i], vote.label, vote.vote_fraction});
    }
  }
  return compute_metrics(pooled);
}

}  // namespace ecodrive
