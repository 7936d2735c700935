#include "rulescope/rule_space.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "rulescope/error.hpp"

namespace rulescope {

std::vector<RuleVector> vectorize(const std::vector<DecisionRule>& rules, std::span<const FeatureBounds> bounds) {
  std::vector<RuleVector> out;
  out.reserve(rules.size());
  for (const auto& rule : rules) {
    if (rule.intervals.size() != bounds.size()) {
      throw Error(ErrorKind::kInvalidArgument, "rule " + rule.rule_id + " has the wrong number of features");
    }
    RuleVector v;
    v.rule_id = rule.rule_id;
    v.coords.reserve(2 * bounds.size());
    for (size_t f = 0; f < bounds.size(); ++f) {
      const double range = bounds[f].max - bounds[f].min;
      if (!(range > 0.0)) {
        v.coords.push_back(0.5);
        v.coords.push_back(0.5);
        continue;
      }
      v.coords.push_back((rule.intervals[f].lo - bounds[f].min) / range);
      v.coords.push_back((rule.intervals[f].hi - bounds[f].min) / range);
    }
    out.push_back(std::move(v));
  }
  return out;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

DbscanResult dbscan(const std::vector<std::vector<double>>& points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dbscan eps must be positive");
  if (min_pts < 1) throw Error(ErrorKind::kInvalidArgument, "dbscan min_pts must be at least 1");
  const size_t n = points.size();
  std::vector<std::vector<size_t>> neighbors(n);
  for (size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (size_t j = i + 1; j < n; ++j) {
      if (euclidean(points[i], points[j]) <= eps) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }
  for (auto& list : neighbors) std::sort(list.begin(), list.end());
  std::vector<bool> core(n);
  for (size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= static_cast<size_t>(min_pts);

  std::vector<int> component(n, -1);
  int next = 0;
  for (size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || component[seed] >= 0) continue;
    std::deque<size_t> queue{seed};
    component[seed] = next;
    while (!queue.empty()) {
      const size_t p = queue.front();
      queue.pop_front();
      for (size_t q : neighbors[p]) {
        if (core[q] && component[q] < 0) {
          component[q] = next;
          queue.push_back(q);
        }
      }
    }
    ++next;
  }

  DbscanResult out;
  out.labels.assign(n, -1);
  for (size_t i = 0; i < n; ++i) {
    if (core[i]) {
      out.labels[i] = component[i];
      continue;
    }
    double best = 0.0;
    int label = -1;
    for (size_t q : neighbors[i]) {
      if (!core[q]) continue;
      const double d = euclidean(points[i], points[q]);
      if (label < 0 || d < best) {
        best = d;
        label = component[q];
      }
    }
    out.labels[i] = label;
  }

  // Renumber by first appearance so labels do not depend on seed order.
  std::vector<int> remap(static_cast<size_t>(next), -1);
  int fresh = 0;
  for (int& label : out.labels) {
    if (label < 0) continue;
    auto& r = remap[static_cast<size_t>(label)];
    if (r < 0) r = fresh++;
    label = r;
  }
  out.n_clusters = fresh;
  return out;
}

double default_dbscan_eps(const std::vector<std::vector<double>>& points, int min_pts, size_t sample_size) {
  const size_t n = points.size();
  if (n < 2) return 1e-9;
  const size_t k = std::min(static_cast<size_t>(std::max(1, min_pts)), n - 1);
  const size_t stride = std::max<size_t>(1, n / std::max<size_t>(1, sample_size));
  std::vector<double> kth;
  std::vector<double> dist;
  for (size_t i = 0; i < n && kth.size() < sample_size; i += stride) {
    dist.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j != i) dist.push_back(euclidean(points[i], points[j]));
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<long>(k - 1), dist.end());
    kth.push_back(dist[k - 1]);
  }
  std::sort(kth.begin(), kth.end());
  const size_t m = kth.size();
  const double median = m % 2 == 1 ? kth[m / 2] : 0.5 * (kth[m / 2 - 1] + kth[m / 2]);
  return median > 0.0 ? median : 1e-9;
}

int tune_neighbors(int n_clusters) { return std::clamp(n_clusters, kMinNeighbors, kMaxNeighbors); }

}  // namespace rulescope
