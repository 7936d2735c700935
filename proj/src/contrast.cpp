#include "rulescope/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "rulescope/error.hpp"

namespace rulescope {

namespace {

double normalize(double v, const FeatureBounds& b) {
  const double range = b.max - b.min;
  if (!(range > 0.0)) return 0.5;
  return (v - b.min) / range;
}

Interval normalize(const Interval& iv, const FeatureBounds& b) { return {normalize(iv.lo, b), normalize(iv.hi, b)}; }

std::vector<double> histogram(const std::vector<double>& values, int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  for (double v : values) {
    auto bin = static_cast<long>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
    bin = std::clamp<long>(bin, 0, bins - 1);
    h[static_cast<size_t>(bin)] += 1.0;
  }
  double total = 0.0;
  for (double& x : h) {
    x = x / static_cast<double>(values.size()) + kHistogramSmoothing;
    total += x;
  }
  for (double& x : h) x /= total;
  return h;
}

using RuleIndex = std::unordered_map<std::string, const DecisionRule*>;

RuleIndex index_rules(const std::vector<DecisionRule>& rules) {
  RuleIndex index;
  for (const auto& r : rules) index.emplace(r.rule_id, &r);
  return index;
}

std::vector<const DecisionRule*> resolve(const std::vector<std::string>& ids, const RuleIndex& index) {
  std::vector<const DecisionRule*> out;
  std::set<std::string> seen;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::kNotFound, "unknown rule id '" + id + "'");
    if (seen.insert(id).second) out.push_back(it->second);
  }
  return out;
}

std::vector<std::optional<Interval>> group_intervals(const std::vector<const DecisionRule*>& group,
                                                     std::span<const FeatureBounds> bounds) {
  std::vector<std::optional<Interval>> out;
  for (size_t f = 0; f < bounds.size(); ++f) {
    std::vector<Interval> axis;
    for (const auto* r : group) axis.push_back(normalize(r->intervals[f], bounds[f]));
    out.push_back(group_interval(axis));
  }
  return out;
}

}  // namespace

const char* compare_mode_name(CompareMode mode) { return mode == CompareMode::kOverlap ? "overlap" : "difference"; }

CompareMode parse_compare_mode(std::string_view name) {
  if (name == "overlap") return CompareMode::kOverlap;
  if (name == "difference") return CompareMode::kDifference;
  throw Error(ErrorKind::kInvalidArgument, "mode must be 'overlap' or 'difference'");
}

std::vector<FeatureScore> rank_features(const ContrastRequest& request, const std::vector<DecisionRule>& rules,
                                        std::span<const FeatureBounds> bounds) {
  if (request.bins < 2) throw Error(ErrorKind::kInvalidArgument, "bins must be at least 2");
  if (request.selected.empty()) throw Error(ErrorKind::kInvalidArgument, "selection is empty");
  const auto index = index_rules(rules);
  std::vector<std::string> universe_ids = request.universe;
  if (universe_ids.empty()) {
    for (const auto& r : rules) universe_ids.push_back(r.rule_id);
  }
  const auto universe = resolve(universe_ids, index);
  const std::set<std::string> selected(request.selected.begin(), request.selected.end());
  for (const auto& id : selected) {
    if (!index.count(id)) throw Error(ErrorKind::kNotFound, "unknown rule id '" + id + "'");
    if (std::none_of(universe.begin(), universe.end(), [&](const DecisionRule* r) { return r->rule_id == id; })) {
      throw Error(ErrorKind::kInvalidArgument, "selected rule '" + id + "' is not in the universe");
    }
  }
  if (selected.size() >= universe.size()) {
    throw Error(ErrorKind::kInvalidArgument, "selection covers the whole universe; nothing to contrast");
  }

  std::vector<FeatureScore> scores;
  for (size_t f = 0; f < bounds.size(); ++f) {
    std::vector<double> inside;
    std::vector<double> rest;
    for (const auto* r : universe) {
      const double mid = normalize(0.5 * (r->intervals[f].lo + r->intervals[f].hi), bounds[f]);
      (selected.count(r->rule_id) ? inside : rest).push_back(mid);
    }
    const auto p = histogram(inside, request.bins);
    const auto q = histogram(rest, request.bins);
    double h = 0.0;
    for (size_t b = 0; b < p.size(); ++b) h -= p[b] * std::log(q[b]);
    scores.push_back({f, h});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const FeatureScore& a, const FeatureScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.feature < b.feature;
  });
  return scores;
}

std::optional<Interval> group_interval(const std::vector<Interval>& intervals) {
  if (intervals.empty()) throw Error(ErrorKind::kInvalidArgument, "group is empty");
  Interval acc = intervals.front();
  for (const auto& iv : intervals) {
    acc.lo = std::max(acc.lo, iv.lo);
    acc.hi = std::min(acc.hi, iv.hi);
  }
  if (acc.lo > acc.hi) return std::nullopt;
  return acc;
}

std::vector<Interval> overlap(const std::optional<Interval>& a, const std::optional<Interval>& b) {
  if (!a || !b) return {};
  const Interval x{std::max(a->lo, b->lo), std::min(a->hi, b->hi)};
  if (x.lo > x.hi) return {};
  return {x};
}

std::vector<Interval> difference(const std::optional<Interval>& a, const std::optional<Interval>& b) {
  if (!a && !b) return {};
  if (!a) return {*b};
  if (!b) return {*a};
  if (a->hi < b->lo || b->hi < a->lo) {
    return a->lo <= b->lo ? std::vector<Interval>{*a, *b} : std::vector<Interval>{*b, *a};
  }
  std::vector<Interval> out;
  const double lo_min = std::min(a->lo, b->lo);
  const double lo_max = std::max(a->lo, b->lo);
  const double hi_min = std::min(a->hi, b->hi);
  const double hi_max = std::max(a->hi, b->hi);
  if (lo_min < lo_max) out.push_back({lo_min, lo_max});
  if (hi_min < hi_max) out.push_back({hi_min, hi_max});
  return out;
}

std::vector<std::vector<Interval>> compare_groups(const std::vector<std::optional<Interval>>& anchored,
                                                  const std::vector<std::optional<Interval>>& selected,
                                                  CompareMode mode) {
  if (anchored.size() != selected.size()) throw Error(ErrorKind::kInvalidArgument, "groups differ in feature count");
  std::vector<std::vector<Interval>> out;
  for (size_t f = 0; f < anchored.size(); ++f) {
    out.push_back(mode == CompareMode::kOverlap ? overlap(anchored[f], selected[f])
                                                : difference(anchored[f], selected[f]));
  }
  return out;
}

ContrastReport contrast(const ContrastRequest& request, const std::vector<DecisionRule>& rules,
                        std::span<const FeatureBounds> bounds) {
  ContrastReport report;
  report.bins = request.bins;
  report.mode = request.mode;
  report.ranked_features = rank_features(request, rules, bounds);
  const auto index = index_rules(rules);
  report.selected_intervals = group_intervals(resolve(request.selected, index), bounds);
  if (request.anchored) {
    if (request.anchored->empty()) throw Error(ErrorKind::kInvalidArgument, "anchored group is empty");
    report.anchored_intervals = group_intervals(resolve(*request.anchored, index), bounds);
    report.comparison_intervals = compare_groups(report.anchored_intervals, report.selected_intervals, request.mode);
  }
  return report;
}

}  // namespace rulescope
