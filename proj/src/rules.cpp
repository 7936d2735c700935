#include "rulescope/rules.hpp"

#include <algorithm>
#include <cmath>

#include "rulescope/error.hpp"

namespace rulescope {

namespace {

void collect(const DecisionTree& tree, int node_id, std::vector<Interval>& path,
             std::vector<std::pair<int, std::vector<Interval>>>& out) {
  const auto& node = tree.nodes[static_cast<size_t>(node_id)];
  if (node.is_leaf()) {
    out.emplace_back(node_id, path);
    return;
  }
  const auto f = static_cast<size_t>(node.feature);
  const Interval saved = path[f];
  path[f].hi = std::min(path[f].hi, node.threshold);
  collect(tree, node.left, path, out);
  path[f] = saved;
  path[f].lo = std::max(path[f].lo, node.threshold);
  collect(tree, node.right, path, out);
  path[f] = saved;
}

}  // namespace

std::vector<DecisionRule> extract_rules(const TrainedModel& model, const Dataset& train) {
  std::vector<DecisionRule> rules;
  for (size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tree = model.trees[t];
    if (tree.num_features != train.cols() || tree.num_classes != train.num_classes()) {
      throw Error(ErrorKind::kInvalidArgument, "model " + model.id + " does not match the dataset schema");
    }
    std::vector<Interval> path;
    for (const auto& b : train.bounds) path.push_back({b.min, b.max});
    std::vector<std::pair<int, std::vector<Interval>>> leaves;
    collect(tree, 0, path, leaves);

    std::vector<size_t> slot(tree.nodes.size(), 0);
    for (size_t k = 0; k < leaves.size(); ++k) slot[static_cast<size_t>(leaves[k].first)] = k;
    const size_t first = rules.size();
    for (auto& [leaf, intervals] : leaves) {
      DecisionRule r;
      r.rule_id = model.id + ":" + std::to_string(t) + ":" + std::to_string(leaf);
      r.model_id = model.id;
      r.algorithm = model.algorithm;
      r.tree_index = static_cast<int>(t);
      r.leaf_id = leaf;
      r.intervals = std::move(intervals);
      r.predicted_class = tree.nodes[static_cast<size_t>(leaf)].prediction;
      r.class_counts.assign(train.num_classes(), 0);
      rules.push_back(std::move(r));
    }
    for (size_t i = 0; i < train.rows(); ++i) {
      const int leaf = predict(tree, train.row(i)).leaf;
      auto& r = rules[first + slot[static_cast<size_t>(leaf)]];
      r.covered_instances.push_back(i);
      ++r.class_counts[static_cast<size_t>(train.labels[i])];
    }
    for (size_t k = first; k < rules.size(); ++k) {
      auto& r = rules[k];
      r.support = r.covered_instances.size();
      if (r.support > 0) {
        std::vector<double> counts(r.class_counts.begin(), r.class_counts.end());
        r.impurity = gini(counts);
      }
    }
  }
  return rules;
}

Interval round_interval(Interval interval, int decimals) {
  if (decimals < 0) throw Error(ErrorKind::kInvalidArgument, "decimals must be non-negative");
  const double scale = std::pow(10.0, decimals);
  const auto on_grid = [scale](double v) { return std::nearbyint(v * scale) / scale == v; };
  // Beyond 2^53 the grid is finer than double spacing.
  const auto representable = [scale](double v) { return std::fabs(v * scale) < 9.0e15; };

  if (representable(interval.lo) && !on_grid(interval.lo)) {
    double k = std::floor(interval.lo * scale);
    while (k / scale > interval.lo) k -= 1.0;
    interval.lo = k / scale;
  }
  if (representable(interval.hi) && !on_grid(interval.hi)) {
    double k = std::ceil(interval.hi * scale);
    while (k / scale < interval.hi) k += 1.0;
    interval.hi = k / scale;
  }
  return interval;
}

DecisionRule round_rule(const DecisionRule& rule, int decimals) {
  DecisionRule out = rule;
  for (auto& iv : out.intervals) iv = round_interval(iv, decimals);
  return out;
}

bool rule_matches(const DecisionRule& rule, std::span<const double> instance) {
  if (instance.size() != rule.intervals.size()) {
    throw Error(ErrorKind::kInvalidArgument, "instance has the wrong number of features");
  }
  for (size_t f = 0; f < instance.size(); ++f) {
    if (!rule.intervals[f].contains(instance[f])) return false;
  }
  return true;
}

FilterResult apply_filter(const std::vector<DecisionRule>& rules, const RuleFilter& filter) {
  if (filter.min_support > filter.max_support) {
    throw Error(ErrorKind::kInvalidArgument, "min_support exceeds max_support");
  }
  FilterResult out;
  for (const auto& rule : rules) {
    if (rule.support < filter.min_support || rule.support > filter.max_support) continue;
    if (filter.test_instance && !rule_matches(round_rule(rule, filter.rounding_decimals), *filter.test_instance)) {
      continue;
    }
    (rule.impurity > filter.max_impurity ? out.dimmed : out.visible).push_back(rule.rule_id);
  }
  return out;
}

}  // namespace rulescope
