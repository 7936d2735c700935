#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/rules.hpp"

namespace rulescope {

enum class CompareMode { kOverlap, kDifference };

const char* compare_mode_name(CompareMode mode);
CompareMode parse_compare_mode(std::string_view name);

struct ContrastRequest {
  std::vector<std::string> selected;
  std::vector<std::string> universe;  // empty means every rule supplied
  int bins = 10;
  CompareMode mode = CompareMode::kOverlap;
  std::optional<std::vector<std::string>> anchored;
};

struct FeatureScore {
  size_t feature = 0;
  double score = 0.0;
};

/// Group and comparison intervals are in normalized [0, 1] units.
struct ContrastReport {
  std::vector<FeatureScore> ranked_features;
  std::vector<std::optional<Interval>> selected_intervals;
  std::vector<std::optional<Interval>> anchored_intervals;
  std::vector<std::vector<Interval>> comparison_intervals;
  int bins = 10;
  CompareMode mode = CompareMode::kOverlap;
};

inline constexpr double kHistogramSmoothing = 1e-9;

/// Cross-entropy H(p_sel, p_rest) per feature between the binned interval
/// midpoints of the selected rules and of the remaining universe, sorted
/// descending (feature index on ties).
std::vector<FeatureScore> rank_features(const ContrastRequest& request, const std::vector<DecisionRule>& rules,
                                        std::span<const FeatureBounds> bounds);

/// Tightest common interval of a group on one axis; nullopt if void.
std::optional<Interval> group_interval(const std::vector<Interval>& intervals);

std::vector<Interval> overlap(const std::optional<Interval>& a, const std::optional<Interval>& b);
/// (A u B) \ (A n B) as zero, one or two intervals, ascending.
std::vector<Interval> difference(const std::optional<Interval>& a, const std::optional<Interval>& b);

std::vector<std::vector<Interval>> compare_groups(const std::vector<std::optional<Interval>>& anchored,
                                                  const std::vector<std::optional<Interval>>& selected,
                                                  CompareMode mode);

ContrastReport contrast(const ContrastRequest& request, const std::vector<DecisionRule>& rules,
                        std::span<const FeatureBounds> bounds);

}  // namespace rulescope
