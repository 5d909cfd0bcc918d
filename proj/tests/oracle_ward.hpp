#pragma once

// Independent agglomerative reference for Ward clustering. Every step
// recomputes each candidate merge's within-cluster sum-of-squares increase
// from scratch (centroid + squared deviations over the raw members), so it
// shares no code path with the Lance-Williams implementation it checks.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ecodrive/clustering.hpp"

namespace testutil {

inline double wcss(std::span<const ecodrive::FeatureVector> points,
                   const std::vector<int>& members) {
  ecodrive::FeatureVector centroid{};
  for (const int m : members) {
    for (std::size_t d = 0; d < 6; ++d) centroid[d] += points[static_cast<std::size_t>(m)][d];
  }
  for (std::size_t d = 0; d < 6; ++d) centroid[d] /= static_cast<double>(members.size());
  double total = 0.0;
  for (const int m : members) {
    for (std::size_t d = 0; d < 6; ++d) {
      const double diff = points[static_cast<std::size_t>(m)][d] - centroid[d];
      total += diff * diff;
    }
  }
  return total;
}

inline ecodrive::Dendrogram naive_ward(std::span<const ecodrive::FeatureVector> points) {
  struct Cluster {
    int node_id;
    std::vector<int> members;
  };
  const int n = static_cast<int>(points.size());
  std::vector<Cluster> active;
  for (int i = 0; i < n; ++i) active.push_back(Cluster{i, {i}});

  ecodrive::Dendrogram out;
  out.leaf_count = n;
  for (int step = 0; step < n - 1; ++step) {
    double best_cost = std::numeric_limits<double>::infinity();
    int best_min_id = std::numeric_limits<int>::max();
    int best_max_id = std::numeric_limits<int>::max();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        std::vector<int> merged = active[i].members;
        merged.insert(merged.end(), active[j].members.begin(), active[j].members.end());
        const double cost = wcss(points, merged) - wcss(points, active[i].members) -
                            wcss(points, active[j].members);
        const int lo = std::min(active[i].node_id, active[j].node_id);
        const int hi = std::max(active[i].node_id, active[j].node_id);
        if (cost < best_cost || (cost == best_cost &&
                                 (lo < best_min_id || (lo == best_min_id && hi < best_max_id)))) {
          best_cost = cost;
          best_min_id = lo;
          best_max_id = hi;
          bi = i;
          bj = j;
        }
      }
    }
    Cluster merged;
    merged.node_id = n + step;
    merged.members = active[bi].members;
    merged.members.insert(merged.members.end(), active[bj].members.begin(),
                          active[bj].members.end());
    out.merges.push_back(ecodrive::DendrogramMerge{
        best_min_id, best_max_id, std::sqrt(std::max(2.0 * best_cost, 0.0)),
        static_cast<int>(merged.members.size())});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    active.push_back(std::move(merged));
  }
  return out;
}

}  // namespace testutil
