#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/ensemble.hpp"

namespace rulescope {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

/// A root-to-leaf path as closed per-feature intervals in raw units.
///
/// class_counts and impurity come from the training rows routed to the leaf
/// (unweighted), while predicted_class is the leaf's own vote, so the rule
/// always agrees with the tree it was read from.
struct DecisionRule {
  std::string rule_id;  // "<model>:<tree>:<leaf node>"
  std::string model_id;
  Algorithm algorithm = Algorithm::kRandomForest;
  int tree_index = 0;
  int leaf_id = 0;
  std::vector<Interval> intervals;
  int predicted_class = 0;
  size_t support = 0;
  double impurity = 0.0;
  std::vector<size_t> covered_instances;
  std::vector<size_t> class_counts;

  bool operator==(const DecisionRule&) const = default;
};

std::vector<DecisionRule> extract_rules(const TrainedModel& model, const Dataset& train);

/// Widens each interval to a grid of `decimals` places: lo rounds down and
/// hi rounds up. Bounds already on the grid are left alone, so the
/// operation is idempotent and never shrinks an interval.
DecisionRule round_rule(const DecisionRule& rule, int decimals);
Interval round_interval(Interval interval, int decimals);

bool rule_matches(const DecisionRule& rule, std::span<const double> instance);

struct RuleFilter {
  size_t min_support = 0;
  size_t max_support = std::numeric_limits<size_t>::max();
  double max_impurity = 1.0;
  std::optional<std::vector<double>> test_instance;
  int rounding_decimals = 15;

  bool operator==(const RuleFilter&) const = default;
};

struct FilterResult {
  std::vector<std::string> visible;
  std::vector<std::string> dimmed;
};

/// Support bounds and the test-instance limit hide rules; impurity above
/// max_impurity only dims them.
FilterResult apply_filter(const std::vector<DecisionRule>& rules, const RuleFilter& filter);

}  // namespace rulescope
