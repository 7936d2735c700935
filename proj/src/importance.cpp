#include "rulescope/importance.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "rulescope/error.hpp"

namespace rulescope {

namespace {

std::vector<double> tree_importance(const DecisionTree& tree, size_t num_features) {
  std::vector<double> imp(num_features, 0.0);
  if (tree.nodes.empty()) return imp;
  const double root_weight = tree.nodes.front().weight;
  if (!(root_weight > 0.0)) return imp;
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) continue;
    const auto& left = tree.nodes[static_cast<size_t>(node.left)];
    const auto& right = tree.nodes[static_cast<size_t>(node.right)];
    const double decrease = node.weight * node.impurity - left.weight * left.impurity - right.weight * right.impurity;
    imp[static_cast<size_t>(node.feature)] += std::max(0.0, decrease) / root_weight;
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0) {
    for (double& v : imp) v /= total;
  }
  return imp;
}

}  // namespace

std::vector<double> model_importance(const TrainedModel& model, size_t num_features) {
  std::vector<double> imp(num_features, 0.0);
  for (size_t t = 0; t < model.trees.size(); ++t) {
    const double w = t < model.stage_weights.size() ? model.stage_weights[t] : 1.0;
    const auto tree = tree_importance(model.trees[t], num_features);
    for (size_t f = 0; f < num_features; ++f) imp[f] += w * tree[f];
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (!(total > 0.0)) return std::vector<double>(num_features, 1.0 / static_cast<double>(num_features));
  for (double& v : imp) v /= total;
  return imp;
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kInvalidArgument, "box statistics of an empty sample");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  BoxStats s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

ImportanceTable aggregate(const std::vector<TrainedModel>& models, const std::vector<std::string>& active_ids,
                          const std::vector<std::string>& feature_names) {
  if (active_ids.empty()) throw Error(ErrorKind::kInvalidArgument, "at least one active model is required");
  if (models.empty()) throw Error(ErrorKind::kInvalidArgument, "no models");
  const size_t n = feature_names.size();
  const std::set<std::string> active(active_ids.begin(), active_ids.end());

  ImportanceTable table;
  table.feature_names = feature_names;
  table.per_algorithm_stats.resize(n);
  table.active_mean.assign(n, 0.0);
  table.all_mean.assign(n, 0.0);

  std::map<std::string, std::vector<std::vector<double>>> by_algorithm;  // tag -> models -> features
  size_t active_count = 0;
  for (const auto& m : models) {
    const auto imp = model_importance(m, n);
    table.per_model[m.id] = imp;
    for (size_t f = 0; f < n; ++f) table.all_mean[f] += imp[f];
    if (active.count(m.id)) {
      ++active_count;
      for (size_t f = 0; f < n; ++f) table.active_mean[f] += imp[f];
      by_algorithm[algorithm_tag(m.algorithm)].push_back(imp);
    }
  }
  for (const auto& id : active_ids) {
    if (!table.per_model.count(id)) throw Error(ErrorKind::kNotFound, "unknown model id '" + id + "'");
  }

  for (size_t f = 0; f < n; ++f) {
    table.active_mean[f] /= static_cast<double>(active_count);
    table.all_mean[f] /= static_cast<double>(models.size());
    for (const auto& [tag, vectors] : by_algorithm) {
      std::vector<double> column;
      for (const auto& v : vectors) column.push_back(v[f]);
      table.per_algorithm_stats[f][tag] = box_stats(std::move(column));
    }
  }
  table.delta.resize(n);
  for (size_t f = 0; f < n; ++f) table.delta[f] = table.active_mean[f] - table.all_mean[f];
  table.display_order.resize(n);
  std::iota(table.display_order.begin(), table.display_order.end(), size_t{0});
  std::stable_sort(table.display_order.begin(), table.display_order.end(),
                   [&](size_t a, size_t b) { return table.active_mean[a] > table.active_mean[b]; });
  return table;
}

}  // namespace rulescope
