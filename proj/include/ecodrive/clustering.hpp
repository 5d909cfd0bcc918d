#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecodrive/telemetry.hpp"
#include "ecodrive/weather.hpp"

namespace ecodrive {

/// Fixed feature order shared by clustering and classification.
using FeatureVector = std::array<double, 6>;

inline constexpr std::array<const char*, 6> kFeatureNames = {
    "avg_speed", "avg_acceleration", "is_idling", "elevation_change", "hour",
    "weather_severity"};

FeatureVector event_features(const DrivingEvent& event,
                             const SeverityMap& severity = SeverityMap{});

struct StandardizeStats {
  std::array<double, 6> mean{};
  std::array<double, 6> stddev{};  // sample (n-1); 0 marks a constant dimension
};

/// Z-scores each dimension with the input's own mean and sample stddev. A
/// zero-variance dimension maps to all zeros. Throws InsufficientData for n < 2.
std::pair<std::vector<FeatureVector>, StandardizeStats> standardize(
    std::span<const FeatureVector> vectors);

double pairwise_euclidean(const FeatureVector& a, const FeatureVector& b);

struct DendrogramMerge {
  int left = 0;    // node ids; leaves 0..n-1, merge i creates node n+i
  int right = 0;
  double height = 0.0;
  int size = 0;    // members in the merged cluster
};

struct Dendrogram {
  int leaf_count = 0;
  std::vector<DendrogramMerge> merges;  // exactly leaf_count-1 entries
};

/// Agglomeration by Ward's minimum-variance criterion (Lance-Williams update
/// on squared Euclidean distances). Heights are on the distance scale:
/// height^2 equals twice the increase in within-cluster sum of squares, so a
/// two-point merge reports their Euclidean distance. Equal-cost merges pick
/// the pair whose (min node id, max node id) is lexicographically smallest.
Dendrogram ward_cluster(std::span<const FeatureVector> vectors);

/// Flat cut keeping k clusters (undoes the last k-1 merges). Cluster ids 1..k
/// are assigned in order of each cluster's lowest member index.
std::vector<int> cut_dendrogram_k(const Dendrogram& d, int k);

/// Flat cut applying only merges with height <= h.
std::vector<int> cut_dendrogram_height(const Dendrogram& d, double h);

struct ClusterSummary {
  std::string journey_id;
  int cluster_id = 0;
  int n_members = 0;
  double mean_speed = 0.0;
  double mean_acceleration = 0.0;
  double mean_elevation_change = 0.0;
  int is_idling_mode = 0;
  int hour_mode = 0;
  WeatherCondition weather_mode = WeatherCondition::Clear;
  double mean_fuel_economy = 0.0;  // mean of capped mileages; 0 when none defined
  Label label = Label::Unlabeled;
};

/// Means over raw (unstandardized) member attributes; modes break ties toward
/// the smallest value. journey_id and cluster_id are left for the caller.
ClusterSummary summarize_cluster(std::span<const DrivingEvent> members);

enum class RuleOp { Eq, Ne, Lt, Le, Gt, Ge, In, NotIn };

struct RulePredicate {
  std::string field;           // ClusterSummary field name, e.g. "mean_speed"
  RuleOp op = RuleOp::Eq;
  std::vector<double> values;  // single element except for In/NotIn
};

struct LabelRule {
  Label label = Label::Unlabeled;
  std::vector<RulePredicate> when;  // conjunction; empty matches everything
};

/// Ordered first-match rule list standing in for the expert cluster review.
struct LabelRuleConfig {
  SeverityMap severity;
  std::vector<LabelRule> rules;

  static LabelRuleConfig defaults(double economy_floor = 40.0,
                                  const std::vector<int>& peak_hours = {7, 8, 17, 18, 19},
                                  double congestion_speed = 15.0,
                                  int benign_severity_max = 4);
  static LabelRuleConfig load(const std::string& path);
  void save(const std::string& path) const;
};

/// Manual overrides keyed by (journey id, cluster id); they win over rules.
using OverrideMap = std::map<std::pair<std::string, int>, Label>;

OverrideMap load_overrides(const std::string& path);

/// First matching rule labels each summary; unmatched summaries stay
/// Unlabeled. Total and idempotent over the config's domain.
void label_clusters(std::vector<ClusterSummary>& summaries, const LabelRuleConfig& rules,
                    const OverrideMap& overrides = {});

struct ClusterParams {
  int k = 7;
  std::optional<double> cut_height;  // used instead of k when set
  int min_events = 10;
};

struct JourneyClusterResult {
  bool skipped = false;  // journey below min_events; events left Unlabeled
  std::string warning;
  std::vector<int> assignment;  // per-event cluster id, 1-based
  std::vector<ClusterSummary> summaries;
};

/// standardize -> ward -> cut -> summarize -> label, then propagates cluster
/// labels onto the member events.
JourneyClusterResult cluster_journey(std::vector<DrivingEvent>& events,
                                     const ClusterParams& params, const LabelRuleConfig& rules,
                                     const OverrideMap& overrides = {});

/// One CSV row per cluster: means, modes, economy, and the assigned label.
void write_cluster_report_csv(std::ostream& out, std::span<const ClusterSummary> summaries);

}  // namespace ecodrive
