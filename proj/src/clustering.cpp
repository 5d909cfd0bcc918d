#include "ecodrive/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace ecodrive {

FeatureVector event_features(const DrivingEvent& event, const SeverityMap& severity) {
  return FeatureVector{event.avg_speed,
                       event.avg_acceleration,
                       event.is_idling ? 1.0 : 0.0,
                       event.elevation_change,
                       static_cast<double>(event.hour),
                       static_cast<double>(severity.rank(event.weather))};
}

std::pair<std::vector<FeatureVector>, StandardizeStats> standardize(
    std::span<const FeatureVector> vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) {
    throw InsufficientData("standardize requires at least 2 vectors, got " + std::to_string(n));
  }
  StandardizeStats stats;
  for (std::size_t d = 0; d < 6; ++d) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v[d];
    stats.mean[d] = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& v : vectors) {
      const double diff = v[d] - stats.mean[d];
      ss += diff * diff;
    }
    stats.stddev[d] = std::sqrt(ss / static_cast<double>(n - 1));
  }
  std::vector<FeatureVector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 6; ++d) {
      out[i][d] = stats.stddev[d] > 0.0 ? (vectors[i][d] - stats.mean[d]) / stats.stddev[d] : 0.0;
    }
  }
  return {std::move(out), stats};
}

double pairwise_euclidean(const FeatureVector& a, const FeatureVector& b) {
  double ss = 0.0;
  for (std::size_t d = 0; d < 6; ++d) {
    const double diff = a[d] - b[d];
    ss += diff * diff;
  }
  return std::sqrt(ss);
}

Dendrogram ward_cluster(std::span<const FeatureVector> vectors) {
  const int n = static_cast<int>(vectors.size());
  if (n < 2) {
    throw InsufficientData("ward_cluster requires at least 2 vectors, got " + std::to_string(n));
  }

  // Slot i holds one active cluster; d2 tracks squared inter-cluster distances
  // under the Ward update, which stay equal to 2x the merge's WCSS increase.
  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
  const auto at = [&](int i, int j) -> double& {
    return d2[static_cast<std::size_t>(i) * n + j];
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double ss = 0.0;
      for (std::size_t d = 0; d < 6; ++d) {
        const double diff = vectors[static_cast<std::size_t>(i)][d] -
                            vectors[static_cast<std::size_t>(j)][d];
        ss += diff * diff;
      }
      at(i, j) = at(j, i) = ss;
    }
  }

  std::vector<int> node_id(static_cast<std::size_t>(n));
  std::iota(node_id.begin(), node_id.end(), 0);
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<bool> active(static_cast<std::size_t>(n), true);

  Dendrogram out;
  out.leaf_count = n;
  out.merges.reserve(static_cast<std::size_t>(n) - 1);

  for (int step = 0; step < n - 1; ++step) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_min_id = std::numeric_limits<int>::max();
    int best_max_id = std::numeric_limits<int>::max();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double cand = at(i, j);
        const int lo = std::min(node_id[static_cast<std::size_t>(i)],
                                node_id[static_cast<std::size_t>(j)]);
        const int hi = std::max(node_id[static_cast<std::size_t>(i)],
                                node_id[static_cast<std::size_t>(j)]);
        if (cand < best_d2 ||
            (cand == best_d2 && (lo < best_min_id || (lo == best_min_id && hi < best_max_id)))) {
          best_d2 = cand;
          best_min_id = lo;
          best_max_id = hi;
          bi = i;
          bj = j;
        }
      }
    }

    const double ni = size[static_cast<std::size_t>(bi)];
    const double nj = size[static_cast<std::size_t>(bj)];
    out.merges.push_back(DendrogramMerge{best_min_id, best_max_id,
                                         std::sqrt(std::max(best_d2, 0.0)),
                                         static_cast<int>(ni + nj)});

    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const double nk = size[static_cast<std::size_t>(k)];
      const double updated =
          ((ni + nk) * at(bi, k) + (nj + nk) * at(bj, k) - nk * best_d2) / (ni + nj + nk);
      at(bi, k) = at(k, bi) = updated;
    }
    size[static_cast<std::size_t>(bi)] = ni + nj;
    active[static_cast<std::size_t>(bj)] = false;
    node_id[static_cast<std::size_t>(bi)] = n + step;
  }
  return out;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] =
          parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent_[static_cast<std::size_t>(find(a))] = find(b); }

 private:
  std::vector<int> parent_;
};

std::vector<int> flat_assignment(const Dendrogram& d, std::size_t merges_to_apply) {
  const int n = d.leaf_count;
  // Map node ids to one representative leaf as merges are applied.
  std::vector<int> leaf_of(static_cast<std::size_t>(2 * n - 1), -1);
  for (int i = 0; i < n; ++i) leaf_of[static_cast<std::size_t>(i)] = i;
  UnionFind uf(n);
  for (std::size_t m = 0; m < merges_to_apply; ++m) {
    const auto& merge = d.merges[m];
    const int a = leaf_of[static_cast<std::size_t>(merge.left)];
    const int b = leaf_of[static_cast<std::size_t>(merge.right)];
    uf.unite(a, b);
    leaf_of[static_cast<std::size_t>(n + static_cast<int>(m))] = uf.find(a);
  }

  // Cluster ids 1..k in order of each cluster's lowest member index.
  std::vector<int> root_to_cluster(static_cast<std::size_t>(n), 0);
  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  int next_id = 0;
  for (int i = 0; i < n; ++i) {
    const int root = uf.find(i);
    if (root_to_cluster[static_cast<std::size_t>(root)] == 0) {
      root_to_cluster[static_cast<std::size_t>(root)] = ++next_id;
    }
    assignment[static_cast<std::size_t>(i)] = root_to_cluster[static_cast<std::size_t>(root)];
  }
  return assignment;
}

}  // namespace

std::vector<int> cut_dendrogram_k(const Dendrogram& d, int k) {
  const int n = d.leaf_count;
  if (k < 1 || k > n) {
    throw InvalidK("cut requires 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
  }
  return flat_assignment(d, static_cast<std::size_t>(n - k));
}

std::vector<int> cut_dendrogram_height(const Dendrogram& d, double h) {
  if (!(h >= 0.0)) throw InvalidK("cut height must be >= 0");
  std::size_t applied = 0;
  while (applied < d.merges.size() && d.merges[applied].height <= h) ++applied;
  return flat_assignment(d, applied);
}

ClusterSummary summarize_cluster(std::span<const DrivingEvent> members) {
  ClusterSummary s;
  s.n_members = static_cast<int>(members.size());
  if (members.empty()) return s;

  std::map<int, int> idling_counts, hour_counts, weather_counts;
  double economy_sum = 0.0;
  int economy_n = 0;
  for (const DrivingEvent& ev : members) {
    s.mean_speed += ev.avg_speed;
    s.mean_acceleration += ev.avg_acceleration;
    s.mean_elevation_change += ev.elevation_change;
    ++idling_counts[ev.is_idling ? 1 : 0];
    ++hour_counts[ev.hour];
    ++weather_counts[static_cast<int>(ev.weather)];
    if (const auto mileage = ev.capped_mileage()) {
      economy_sum += *mileage;
      ++economy_n;
    }
  }
  const double n = static_cast<double>(members.size());
  s.mean_speed /= n;
  s.mean_acceleration /= n;
  s.mean_elevation_change /= n;
  s.mean_fuel_economy = economy_n > 0 ? economy_sum / static_cast<double>(economy_n) : 0.0;

  // std::map iterates keys ascending, so first-max picks the smallest value on ties.
  const auto mode = [](const std::map<int, int>& counts) {
    int best_key = 0, best_count = -1;
    for (const auto& [key, count] : counts) {
      if (count > best_count) {
        best_key = key;
        best_count = count;
      }
    }
    return best_key;
  };
  s.is_idling_mode = mode(idling_counts);
  s.hour_mode = mode(hour_counts);
  s.weather_mode = static_cast<WeatherCondition>(mode(weather_counts));
  return s;
}

// ---------------------------------------------------------------------------
// Labeling rules

namespace {

const char* rule_op_name(RuleOp op) {
  switch (op) {
    case RuleOp::Eq: return "==";
    case RuleOp::Ne: return "!=";
    case RuleOp::Lt: return "<";
    case RuleOp::Le: return "<=";
    case RuleOp::Gt: return ">";
    case RuleOp::Ge: return ">=";
    case RuleOp::In: return "in";
    case RuleOp::NotIn: return "not_in";
  }
  return "?";
}

std::optional<RuleOp> parse_rule_op(std::string_view text) {
  if (text == "==") return RuleOp::Eq;
  if (text == "!=") return RuleOp::Ne;
  if (text == "<") return RuleOp::Lt;
  if (text == "<=") return RuleOp::Le;
  if (text == ">") return RuleOp::Gt;
  if (text == ">=") return RuleOp::Ge;
  if (text == "in") return RuleOp::In;
  if (text == "not_in") return RuleOp::NotIn;
  return std::nullopt;
}

double summary_field(const ClusterSummary& s, const std::string& field,
                     const SeverityMap& severity) {
  if (field == "mean_speed") return s.mean_speed;
  if (field == "mean_acceleration") return s.mean_acceleration;
  if (field == "mean_elevation_change") return s.mean_elevation_change;
  if (field == "is_idling_mode") return s.is_idling_mode;
  if (field == "hour_mode") return s.hour_mode;
  if (field == "weather_severity") return severity.rank(s.weather_mode);
  if (field == "mean_fuel_economy") return s.mean_fuel_economy;
  if (field == "n_members") return s.n_members;
  throw ConfigError("unknown label rule field '" + field + "'");
}

bool predicate_matches(const RulePredicate& p, const ClusterSummary& s,
                       const SeverityMap& severity) {
  const double value = summary_field(s, p.field, severity);
  switch (p.op) {
    case RuleOp::Eq: return value == p.values.at(0);
    case RuleOp::Ne: return value != p.values.at(0);
    case RuleOp::Lt: return value < p.values.at(0);
    case RuleOp::Le: return value <= p.values.at(0);
    case RuleOp::Gt: return value > p.values.at(0);
    case RuleOp::Ge: return value >= p.values.at(0);
    case RuleOp::In: return std::find(p.values.begin(), p.values.end(), value) != p.values.end();
    case RuleOp::NotIn:
      return std::find(p.values.begin(), p.values.end(), value) == p.values.end();
  }
  return false;
}

void validate_rules(const LabelRuleConfig& config) {
  ClusterSummary probe;
  for (std::size_t i = 0; i < config.rules.size(); ++i) {
    const LabelRule& rule = config.rules[i];
    if (rule.label == Label::Unlabeled) {
      throw ConfigError("label rule " + std::to_string(i + 1) +
                        " must assign Efficient or Inefficient");
    }
    for (const RulePredicate& p : rule.when) {
      summary_field(probe, p.field, config.severity);  // rejects unknown fields
      if (p.op == RuleOp::In || p.op == RuleOp::NotIn) {
        if (p.values.empty()) {
          throw ConfigError("label rule " + std::to_string(i + 1) + ": '" +
                            std::string(rule_op_name(p.op)) + "' needs a non-empty value list");
        }
      } else if (p.values.size() != 1) {
        throw ConfigError("label rule " + std::to_string(i + 1) + ": operator '" +
                          std::string(rule_op_name(p.op)) + "' takes exactly one value");
      }
    }
  }
}

}  // namespace

LabelRuleConfig LabelRuleConfig::defaults(double economy_floor, const std::vector<int>& peak_hours,
                                          double congestion_speed, int benign_severity_max) {
  LabelRuleConfig config;
  std::vector<double> peaks(peak_hours.begin(), peak_hours.end());
  // Idling is inefficient outright.
  config.rules.push_back(
      LabelRule{Label::Inefficient, {{"is_idling_mode", RuleOp::Eq, {1.0}}}});
  // High economy is efficient regardless of conditions.
  config.rules.push_back(
      LabelRule{Label::Efficient, {{"mean_fuel_economy", RuleOp::Ge, {economy_floor}}}});
  // Low economy with nothing to blame it on (benign weather, off-peak, moving).
  config.rules.push_back(LabelRule{
      Label::Inefficient,
      {{"weather_severity", RuleOp::Le, {static_cast<double>(benign_severity_max)}},
       {"hour_mode", RuleOp::NotIn, peaks},
       {"mean_fuel_economy", RuleOp::Lt, {economy_floor}},
       {"mean_speed", RuleOp::Gt, {congestion_speed}}}});
  // External conditions excuse the rest.
  config.rules.push_back(LabelRule{Label::Efficient, {}});
  validate_rules(config);
  return config;
}

LabelRuleConfig LabelRuleConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label rule config: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("label rule config is not a JSON object: " + path);
  }
  LabelRuleConfig config;
  try {
    if (doc.contains("weather_severity_order")) {
      config.severity =
          SeverityMap::from_order(doc.at("weather_severity_order").get<std::vector<std::string>>());
    }
    if (!doc.contains("rules") || !doc.at("rules").is_array()) {
      throw ConfigError("label rule config needs a 'rules' array");
    }
    for (const auto& rule_json : doc.at("rules")) {
      LabelRule rule;
      const auto label = parse_label(rule_json.at("label").get<std::string>());
      if (!label) {
        throw ConfigError("bad rule label '" + rule_json.at("label").get<std::string>() + "'");
      }
      rule.label = *label;
      for (const auto& pred_json : rule_json.value("when", nlohmann::json::array())) {
        RulePredicate pred;
        pred.field = pred_json.at("field").get<std::string>();
        const auto op = parse_rule_op(pred_json.at("op").get<std::string>());
        if (!op) {
          throw ConfigError("bad rule operator '" + pred_json.at("op").get<std::string>() + "'");
        }
        pred.op = *op;
        const auto& value = pred_json.at("value");
        if (value.is_array()) {
          pred.values = value.get<std::vector<double>>();
        } else {
          pred.values = {value.get<double>()};
        }
        rule.when.push_back(std::move(pred));
      }
      config.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("label rule config " + path + ": " + e.what());
  }
  validate_rules(config);
  return config;
}

void LabelRuleConfig::save(const std::string& path) const {
  nlohmann::ordered_json doc;
  doc["rules"] = nlohmann::ordered_json::array();
  for (const LabelRule& rule : rules) {
    nlohmann::ordered_json rule_json;
    rule_json["label"] = to_string(rule.label);
    rule_json["when"] = nlohmann::ordered_json::array();
    for (const RulePredicate& pred : rule.when) {
      nlohmann::ordered_json pred_json;
      pred_json["field"] = pred.field;
      pred_json["op"] = rule_op_name(pred.op);
      if (pred.op == RuleOp::In || pred.op == RuleOp::NotIn) {
        pred_json["value"] = pred.values;
      } else {
        pred_json["value"] = pred.values.at(0);
      }
      rule_json["when"].push_back(pred_json);
    }
    doc["rules"].push_back(rule_json);
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write label rule config: " + path);
  out << doc.dump(2) << '\n';
}

OverrideMap load_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open override file: " + path);
  OverrideMap overrides;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string journey, cluster_str, label_str;
    if (!std::getline(row, journey, ',') || !std::getline(row, cluster_str, ',') ||
        !std::getline(row, label_str)) {
      throw ConfigError("override line " + std::to_string(line_no) +
                        ": expected 'journey_id,cluster_id,label'");
    }
    int cluster = 0;
    try {
      cluster = std::stoi(cluster_str);
    } catch (const std::exception&) {
      throw ConfigError("override line " + std::to_string(line_no) + ": bad cluster id '" +
                        cluster_str + "'");
    }
    const auto label = parse_label(label_str);
    if (!label) {
      throw ConfigError("override line " + std::to_string(line_no) + ": bad label '" + label_str +
                        "'");
    }
    overrides[{journey, cluster}] = *label;
  }
  return overrides;
}

void label_clusters(std::vector<ClusterSummary>& summaries, const LabelRuleConfig& config,
                    const OverrideMap& overrides) {
  validate_rules(config);
  for (ClusterSummary& summary : summaries) {
    summary.label = Label::Unlabeled;
    for (const LabelRule& rule : config.rules) {
      const bool matches =
          std::all_of(rule.when.begin(), rule.when.end(), [&](const RulePredicate& p) {
            return predicate_matches(p, summary, config.severity);
          });
      if (matches) {
        summary.label = rule.label;
        break;
      }
    }
    const auto it = overrides.find({summary.journey_id, summary.cluster_id});
    if (it != overrides.end()) summary.label = it->second;
  }
}

JourneyClusterResult cluster_journey(std::vector<DrivingEvent>& events,
                                     const ClusterParams& params, const LabelRuleConfig& rules,
                                     const OverrideMap& overrides) {
  JourneyClusterResult result;
  const std::string journey_id = events.empty() ? std::string() : events.front().journey_id;
  if (static_cast<int>(events.size()) < params.min_events) {
    result.skipped = true;
    result.warning = "journey " + journey_id + " has " + std::to_string(events.size()) +
                     " events (minimum " + std::to_string(params.min_events) +
                     "); left Unlabeled";
    return result;
  }

  std::vector<FeatureVector> features;
  features.reserve(events.size());
  for (const DrivingEvent& ev : events) features.push_back(event_features(ev, rules.severity));
  const auto [standardized, stats] = standardize(features);
  const Dendrogram dendrogram = ward_cluster(standardized);

  if (params.cut_height) {
    result.assignment = cut_dendrogram_height(dendrogram, *params.cut_height);
  } else {
    const int effective_k = std::min(params.k, static_cast<int>(events.size()));
    result.assignment = cut_dendrogram_k(dendrogram, effective_k);
  }

  const int cluster_count = *std::max_element(result.assignment.begin(), result.assignment.end());
  for (int c = 1; c <= cluster_count; ++c) {
    std::vector<DrivingEvent> members;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (result.assignment[i] == c) members.push_back(events[i]);
    }
    ClusterSummary summary = summarize_cluster(members);
    summary.journey_id = journey_id;
    summary.cluster_id = c;
    result.summaries.push_back(std::move(summary));
  }

  label_clusters(result.summaries, rules, overrides);
  for (std::size_t i = 0; i < events.size(); ++i) {
    events[i].label = result.summaries[static_cast<std::size_t>(result.assignment[i] - 1)].label;
  }
  return result;
}

void write_cluster_report_csv(std::ostream& out, std::span<const ClusterSummary> summaries) {
  out << "journey_id,cluster_id,n_members,mean_speed,mean_acceleration,mean_elevation_change,"
         "is_idling_mode,hour_mode,weather_mode,mean_fuel_economy,label\n";
  char buf[256];
  for (const ClusterSummary& s : summaries) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.4f,%.4f,%.4f,%d,%d,%s,%.4f,%s\n",
                  s.journey_id.c_str(), s.cluster_id, s.n_members, s.mean_speed,
                  s.mean_acceleration, s.mean_elevation_change, s.is_idling_mode, s.hour_mode,
                  to_string(s.weather_mode).c_str(), s.mean_fuel_economy,
                  to_string(s.label).c_str());
    out << buf;
  }
}

}  // namespace ecodrive
