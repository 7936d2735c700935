#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/rng.hpp"

namespace rulescope {

struct TreeParams {
  int max_depth = 10;
  int min_samples_leaf = 1;
  std::optional<int> max_features;  // nullopt examines every feature
  uint64_t seed = 0;
};

/// One arena slot. Leaves have feature == -1 and no children.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;  // weighted
  int prediction = 0;
  double weight = 0.0;   // sum of training weights reaching the node
  size_t samples = 0;    // training rows reaching the node (with repeats)
  double impurity = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Binary CART tree. Values <= threshold descend left. Node 0 is the root;
/// nodes are stored in depth-first preorder.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  int depth = 0;
  size_t num_features = 0;
  size_t num_classes = 0;

  size_t leaf_count() const;
  std::vector<int> leaf_ids() const;
};

/// Gini impurity sum_c p_c (1 - p_c). Throws on a zero total.
double gini(std::span<const double> class_counts);

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;

  bool operator==(const Split&) const = default;
};

/// Gains within this of each other count as ties. An impure node may split
/// with zero gain (XOR-like data needs such a first cut); candidates below
/// -kGainTolerance are rounding artefacts of a zero gain and are skipped.
inline constexpr double kGainTolerance = 1e-12;

/// Best (feature, midpoint threshold) by weighted Gini decrease among a
/// random subset of max_features features drawn from rng. Ties go to the
/// lower feature index, then the lower threshold.
std::optional<Split> best_split(const Dataset& ds, std::span<const size_t> rows,
                                std::span<const double> weights, const TreeParams& params, Rng& rng);

/// weights is indexed by dataset row; rows may repeat (bootstrap draws).
DecisionTree fit_tree(const Dataset& ds, std::span<const size_t> rows, std::span<const double> weights,
                      const TreeParams& params);

struct TreePrediction {
  int label = 0;
  int leaf = 0;
};

TreePrediction predict(const DecisionTree& tree, std::span<const double> instance);

}  // namespace rulescope
