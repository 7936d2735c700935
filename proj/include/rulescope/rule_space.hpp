#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/rules.hpp"

namespace rulescope {

/// Rule as 2n coordinates: (lo, hi) per feature, min-max normalized by the
/// training bounds. A constant feature maps to (0.5, 0.5).
struct RuleVector {
  std::string rule_id;
  std::vector<double> coords;
};

std::vector<RuleVector> vectorize(const std::vector<DecisionRule>& rules, std::span<const FeatureBounds> bounds);

double euclidean(std::span<const double> a, std::span<const double> b);

struct DbscanResult {
  std::vector<int> labels;  // -1 is noise
  int n_clusters = 0;
};

/// Density clustering on Euclidean distance. A point is core when at least
/// min_pts points (itself included) lie within eps. Clusters are the
/// connected components of core points; a border point joins the cluster of
/// its nearest core neighbour. Labels are numbered by first appearance.
DbscanResult dbscan(const std::vector<std::vector<double>>& points, double eps, int min_pts);

/// Median distance to the min_pts-th nearest neighbour over an evenly
/// strided sample of at most sample_size points.
double default_dbscan_eps(const std::vector<std::vector<double>>& points, int min_pts = 4, size_t sample_size = 500);

inline constexpr int kMinNeighbors = 2;
inline constexpr int kMaxNeighbors = 100;

/// Cluster count clamped into [2, 100].
int tune_neighbors(int n_clusters);

struct EmbeddingConfig {
  int n_neighbors = 15;
  double min_dist = 0.1;
  uint64_t seed = 0;
  double dbscan_eps = 0.0;  // <= 0 selects default_dbscan_eps
  int dbscan_min_pts = 4;
  int n_epochs = 0;         // <= 0 picks by data size

  bool operator==(const EmbeddingConfig&) const = default;
};

struct EmbeddedPoint {
  std::string rule_id;
  double x = 0.0;
  double y = 0.0;
  int cluster_label = -1;
};

/// Fitted rational curve 1 / (1 + a d^(2b)) approximating the min_dist kernel.
struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};
CurveParams fit_curve(double min_dist, double spread = 1.0);

/// Neighbour-graph layout: fuzzy k-NN graph, attraction along edges and
/// sampled repulsion, seeded and deterministic. Duplicate vectors share one
/// position. Returns an empty vector if the stop token fires.
std::vector<std::array<double, 2>> embed_coordinates(const std::vector<std::vector<double>>& points,
                                                     const EmbeddingConfig& config, std::stop_token stop = {});

struct EmbeddingResult {
  std::vector<EmbeddedPoint> points;
  int n_clusters = 0;
  int n_neighbors = 0;
  double eps = 0.0;
};

/// DBSCAN over the rule vectors, n_neighbors tuned from the cluster count
/// when tune is set, then the layout.
EmbeddingResult embed(const std::vector<RuleVector>& vectors, const EmbeddingConfig& config, bool tune = true,
                      std::stop_token stop = {});

}  // namespace rulescope
