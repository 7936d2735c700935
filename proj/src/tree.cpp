#include "rulescope/tree.hpp"

#include <algorithm>
#include <numeric>

#include "rulescope/error.hpp"

namespace rulescope {

namespace {

int argmax(std::span<const double> counts) {
  int best = 0;
  for (size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[static_cast<size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

bool is_pure(std::span<const double> counts) {
  int nonzero = 0;
  for (double c : counts) nonzero += c > 0.0 ? 1 : 0;
  return nonzero <= 1;
}

std::vector<int> candidate_features(size_t num_features, const TreeParams& params, Rng& rng) {
  std::vector<int> features(num_features);
  std::iota(features.begin(), features.end(), 0);
  if (!params.max_features || static_cast<size_t>(*params.max_features) >= num_features) return features;
  const auto k = static_cast<size_t>(std::max(1, *params.max_features));
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + rng.uniform_index(num_features - i);
    std::swap(features[i], features[j]);
  }
  features.resize(k);
  std::sort(features.begin(), features.end());
  return features;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, std::span<const double> weights, const TreeParams& params)
      : ds_(ds), weights_(weights), params_(params), rng_(params.seed) {}

  DecisionTree build(std::vector<size_t> rows) {
    tree_.num_features = ds_.cols();
    tree_.num_classes = ds_.num_classes();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.depth = std::max(tree_.depth, depth);

    TreeNode node;
    node.class_counts.assign(ds_.num_classes(), 0.0);
    for (size_t r : rows) {
      node.class_counts[static_cast<size_t>(ds_.labels[r])] += weights_[r];
      node.weight += weights_[r];
    }
    node.samples = rows.size();
    node.prediction = argmax(node.class_counts);
    node.impurity = node.weight > 0.0 ? gini(node.class_counts) : 0.0;

    const auto min_leaf = static_cast<size_t>(std::max(1, params_.min_samples_leaf));
    std::optional<Split> split;
    if (depth < params_.max_depth && !is_pure(node.class_counts) && rows.size() >= 2 * min_leaf &&
        node.weight > 0.0) {
      split = best_split(ds_, rows, weights_, params_, rng_);
    }

    if (!split) {
      tree_.nodes[static_cast<size_t>(id)] = std::move(node);
      return id;
    }

    std::vector<size_t> left_rows;
    std::vector<size_t> right_rows;
    for (size_t r : rows) {
      (ds_.at(r, static_cast<size_t>(split->feature)) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    node.feature = split->feature;
    node.threshold = split->threshold;
    tree_.nodes[static_cast<size_t>(id)] = node;
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    tree_.nodes[static_cast<size_t>(id)].left = left;
    tree_.nodes[static_cast<size_t>(id)].right = right;
    return id;
  }

  const Dataset& ds_;
  std::span<const double> weights_;
  const TreeParams& params_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace

size_t DecisionTree::leaf_count() const {
  return static_cast<size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<int> DecisionTree::leaf_ids() const {
  std::vector<int> ids;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

double gini(std::span<const double> class_counts) {
  double total = 0.0;
  for (double c : class_counts) total += c;
  if (!(total > 0.0)) throw Error(ErrorKind::kInvalidArgument, "gini of an empty node");
  double g = 0.0;
  for (double c : class_counts) {
    const double p = c / total;
    g += p * (1.0 - p);
  }
  return g;
}

std::optional<Split> best_split(const Dataset& ds, std::span<const size_t> rows, std::span<const double> weights,
                                const TreeParams& params, Rng& rng) {
  if (rows.size() < 2) return std::nullopt;
  const size_t num_classes = ds.num_classes();
  std::vector<double> parent(num_classes, 0.0);
  for (size_t r : rows) parent[static_cast<size_t>(ds.labels[r])] += weights[r];
  double total = 0.0;
  for (double c : parent) total += c;
  if (!(total > 0.0) || is_pure(parent)) return std::nullopt;
  const double parent_gini = gini(parent);
  const auto min_leaf = static_cast<size_t>(std::max(1, params.min_samples_leaf));

  std::optional<Split> best;
  std::vector<size_t> order(rows.begin(), rows.end());
  std::vector<double> left(num_classes);
  std::vector<double> right(num_classes);

  for (int feature : candidate_features(ds.cols(), params, rng)) {
    const auto f = static_cast<size_t>(feature);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return ds.at(a, f) < ds.at(b, f); });
    std::fill(left.begin(), left.end(), 0.0);
    double left_weight = 0.0;
    for (size_t k = 0; k + 1 < order.size(); ++k) {
      const size_t r = order[k];
      left[static_cast<size_t>(ds.labels[r])] += weights[r];
      left_weight += weights[r];
      const double lo = ds.at(r, f);
      const double hi = ds.at(order[k + 1], f);
      if (!(lo < hi)) continue;
      const size_t left_rows = k + 1;
      const size_t right_rows = order.size() - left_rows;
      if (left_rows < min_leaf || right_rows < min_leaf) continue;
      double right_weight = 0.0;
      for (size_t c = 0; c < num_classes; ++c) {
        right[c] = parent[c] - left[c];
        if (right[c] < 0.0) right[c] = 0.0;
        right_weight += right[c];
      }
      if (!(left_weight > 0.0) || !(right_weight > 0.0)) continue;
      const double gain = parent_gini - (left_weight / total) * gini(left) - (right_weight / total) * gini(right);
      // Gains equal up to rounding keep the earlier candidate.
      if (gain >= -kGainTolerance && (!best || gain > best->gain + kGainTolerance * std::max(1.0, best->gain))) {
        double threshold = 0.5 * (lo + hi);
        if (!(threshold < hi)) threshold = lo;
        best = Split{feature, threshold, std::max(0.0, gain)};
      }
    }
  }
  return best;
}

DecisionTree fit_tree(const Dataset& ds, std::span<const size_t> rows, std::span<const double> weights,
                      const TreeParams& params) {
  if (rows.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot fit a tree on zero rows");
  if (weights.size() != ds.rows()) throw Error(ErrorKind::kInvalidArgument, "weights must cover every row");
  if (params.max_depth < 1) throw Error(ErrorKind::kInvalidArgument, "max_depth must be at least 1");
  if (params.min_samples_leaf < 1) throw Error(ErrorKind::kInvalidArgument, "min_samples_leaf must be at least 1");
  if (params.max_features && (*params.max_features < 1 || static_cast<size_t>(*params.max_features) > ds.cols())) {
    throw Error(ErrorKind::kInvalidArgument, "max_features must lie in [1, n]");
  }
  double total = 0.0;
  for (size_t r : rows) {
    if (weights[r] < 0.0) throw Error(ErrorKind::kInvalidArgument, "negative instance weight");
    total += weights[r];
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kInvalidArgument, "instance weights are all zero");
  TreeBuilder builder(ds, weights, params);
  return builder.build(std::vector<size_t>(rows.begin(), rows.end()));
}

TreePrediction predict(const DecisionTree& tree, std::span<const double> instance) {
  int id = 0;
  while (!tree.nodes[static_cast<size_t>(id)].is_leaf()) {
    const auto& node = tree.nodes[static_cast<size_t>(id)];
    id = instance[static_cast<size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return {tree.nodes[static_cast<size_t>(id)].prediction, id};
}

}  // namespace rulescope
