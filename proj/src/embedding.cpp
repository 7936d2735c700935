#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <map>
#include <numeric>

#include "rulescope/error.hpp"
#include "rulescope/rng.hpp"
#include "rulescope/rule_space.hpp"

namespace rulescope {

namespace {

constexpr double kInitExtent = 10.0;
constexpr double kGradClip = 4.0;
constexpr int kNegativeRate = 5;

struct Edge {
  size_t head;
  size_t tail;
  double weight;
};

double clip(double v) { return std::clamp(v, -kGradClip, kGradClip); }

// Per-point bandwidth so that sum_j exp(-(d_j - rho) / sigma) = log2(k + 1).
double smooth_sigma(std::span<const double> dists, double rho) {
  const double target = std::log2(static_cast<double>(dists.size()) + 1.0);
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double mid = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    double psum = 0.0;
    for (double d : dists) psum += std::exp(-std::max(0.0, d - rho) / mid);
    if (std::fabs(psum - target) < 1e-5) break;
    if (psum > target) {
      hi = mid;
      mid = 0.5 * (lo + hi);
    } else {
      lo = mid;
      mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
    }
  }
  double mean = 0.0;
  for (double d : dists) mean += d;
  mean /= static_cast<double>(dists.size());
  return std::max(mid, 1e-3 * mean);
}

std::vector<Edge> fuzzy_graph(const std::vector<std::vector<double>>& points, size_t k) {
  const size_t n = points.size();
  std::map<std::pair<size_t, size_t>, std::pair<double, double>> directed;  // (i<j) -> (w_ij, w_ji)
  std::vector<std::pair<double, size_t>> row;
  std::vector<double> dists;
  for (size_t i = 0; i < n; ++i) {
    row.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j != i) row.emplace_back(euclidean(points[i], points[j]), j);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<long>(k), row.end());
    dists.clear();
    for (size_t q = 0; q < k; ++q) dists.push_back(row[q].first);
    const double rho = dists.front();
    const double sigma = smooth_sigma(dists, rho);
    for (size_t q = 0; q < k; ++q) {
      const size_t j = row[q].second;
      const double w = std::exp(-std::max(0.0, row[q].first - rho) / sigma);
      auto& slot = directed[{std::min(i, j), std::max(i, j)}];
      (i < j ? slot.first : slot.second) = w;
    }
  }
  std::vector<Edge> edges;
  edges.reserve(directed.size() * 2);
  for (const auto& [key, w] : directed) {
    const double sym = w.first + w.second - w.first * w.second;
    if (sym <= 0.0) continue;
    edges.push_back({key.first, key.second, sym});
    edges.push_back({key.second, key.first, sym});
  }
  return edges;
}

std::vector<std::array<double, 2>> pca_init(const std::vector<std::vector<double>>& points, Rng& rng) {
  const size_t n = points.size();
  const size_t dim = points.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (size_t i = 0; i < n; ++i) {
    for (size_t d = 0; d < dim; ++d) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = points[i][d];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  std::vector<std::array<double, 2>> y(n, {0.0, 0.0});
  if (dim > 0) {
    const Eigen::MatrixXd cov = (x.transpose() * x) / std::max<double>(1.0, static_cast<double>(n - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto& vecs = solver.eigenvectors();
    const Eigen::Index last = vecs.cols() - 1;
    for (size_t i = 0; i < n; ++i) {
      const auto r = x.row(static_cast<Eigen::Index>(i));
      y[i][0] = r.dot(vecs.col(last));
      y[i][1] = last >= 1 ? r.dot(vecs.col(last - 1)) : 0.0;
    }
  }
  double extent = 0.0;
  for (const auto& p : y) extent = std::max({extent, std::fabs(p[0]), std::fabs(p[1])});
  const double scale = extent > 0.0 ? kInitExtent / extent : 1.0;
  for (auto& p : y) {
    p[0] = p[0] * scale + 1e-4 * kInitExtent * rng.normal();
    p[1] = p[1] * scale + 1e-4 * kInitExtent * rng.normal();
  }
  return y;
}

}  // namespace

CurveParams fit_curve(double min_dist, double spread) {
  // Levenberg-Marquardt on 300 samples of the target kernel over [0, 3 spread].
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples);
  std::vector<double> ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * i / (kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  const auto sse = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
      s += r * r;
    }
    return s;
  };
  double a = 1.0;
  double b = 1.0;
  double lambda = 1e-3;
  double cost = sse(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double f = 1.0 / denom;
      const double r = f - ys[i];
      const double da = -p / (denom * denom);
      const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ga += da * r;
      gb += db * r;
    }
    const double maa = jaa * (1.0 + lambda);
    const double mbb = jbb * (1.0 + lambda);
    const double det = maa * mbb - jab * jab;
    if (std::fabs(det) < 1e-300) break;
    const double step_a = -(mbb * ga - jab * gb) / det;
    const double step_b = -(maa * gb - jab * ga) / det;
    const double na = a + step_a;
    const double nb = b + step_b;
    const double next = (na > 0.0 && nb > 0.0) ? sse(na, nb) : std::numeric_limits<double>::infinity();
    if (next < cost) {
      const bool converged = cost - next < 1e-15;
      a = na;
      b = nb;
      cost = next;
      lambda *= 0.3;
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  return {a, b};
}

std::vector<std::array<double, 2>> embed_coordinates(const std::vector<std::vector<double>>& points,
                                                     const EmbeddingConfig& config, std::stop_token stop) {
  if (config.n_neighbors < kMinNeighbors || config.n_neighbors > kMaxNeighbors) {
    throw Error(ErrorKind::kInvalidArgument, "n_neighbors must lie in [2, 100]");
  }
  if (!(config.min_dist >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "min_dist must be non-negative");
  const size_t n = points.size();
  if (n == 0) return {};

  // Lay out distinct vectors only; duplicates reuse the layout position.
  std::map<std::vector<double>, size_t> index;
  std::vector<size_t> owner(n);
  std::vector<std::vector<double>> unique;
  for (size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.emplace(points[i], unique.size());
    if (inserted) unique.push_back(points[i]);
    owner[i] = it->second;
  }
  const size_t u = unique.size();
  std::vector<std::array<double, 2>> layout(u, {0.0, 0.0});

  if (u > 1) {
    Rng rng(config.seed);
    const size_t k = std::min(static_cast<size_t>(config.n_neighbors - 1), u - 1);
    const auto edges = fuzzy_graph(unique, std::max<size_t>(1, k));
    layout = pca_init(unique, rng);
    const auto [a, b] = fit_curve(config.min_dist);
    const int epochs = config.n_epochs > 0 ? config.n_epochs : (u <= 10000 ? 500 : 200);

    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    std::vector<double> per_sample(edges.size());
    std::vector<double> next_sample(edges.size());
    std::vector<double> per_negative(edges.size());
    std::vector<double> next_negative(edges.size());
    for (size_t e = 0; e < edges.size(); ++e) {
      per_sample[e] = max_w / edges[e].weight;
      next_sample[e] = per_sample[e];
      per_negative[e] = per_sample[e] / kNegativeRate;
      next_negative[e] = per_negative[e];
    }

    for (int epoch = 0; epoch < epochs; ++epoch) {
      if (stop.stop_requested()) return {};
      const double alpha = 1.0 - static_cast<double>(epoch) / epochs;
      for (size_t e = 0; e < edges.size(); ++e) {
        if (next_sample[e] > epoch) continue;
        auto& yi = layout[edges[e].head];
        auto& yj = layout[edges[e].tail];
        double dx = yi[0] - yj[0];
        double dy = yi[1] - yj[1];
        double d2 = dx * dx + dy * dy;
        if (d2 > 0.0) {
          const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (1.0 + a * std::pow(d2, b));
          const double gx = clip(coeff * dx) * alpha;
          const double gy = clip(coeff * dy) * alpha;
          yi[0] += gx;
          yi[1] += gy;
          yj[0] -= gx;
          yj[1] -= gy;
        }
        next_sample[e] += per_sample[e];

        const int negatives = std::max(0, static_cast<int>((epoch - next_negative[e]) / per_negative[e]));
        for (int s = 0; s < negatives; ++s) {
          const size_t other = rng.uniform_index(u);
          if (other == edges[e].head) continue;
          const auto& yk = layout[other];
          dx = yi[0] - yk[0];
          dy = yi[1] - yk[1];
          d2 = dx * dx + dy * dy;
          double gx = kGradClip;
          double gy = kGradClip;
          if (d2 > 0.0) {
            const double coeff = 2.0 * b / ((0.001 + d2) * (1.0 + a * std::pow(d2, b)));
            gx = clip(coeff * dx);
            gy = clip(coeff * dy);
          }
          yi[0] += gx * alpha;
          yi[1] += gy * alpha;
        }
        next_negative[e] += negatives * per_negative[e];
      }
    }
  }

  std::vector<std::array<double, 2>> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = layout[owner[i]];
  return out;
}

EmbeddingResult embed(const std::vector<RuleVector>& vectors, const EmbeddingConfig& config, bool tune,
                      std::stop_token stop) {
  EmbeddingResult result;
  if (vectors.empty()) return result;
  std::vector<std::vector<double>> points;
  points.reserve(vectors.size());
  for (const auto& v : vectors) points.push_back(v.coords);

  result.eps = config.dbscan_eps > 0.0 ? config.dbscan_eps : default_dbscan_eps(points, config.dbscan_min_pts);
  const auto clusters = dbscan(points, result.eps, config.dbscan_min_pts);
  result.n_clusters = clusters.n_clusters;
  EmbeddingConfig effective = config;
  if (tune) effective.n_neighbors = tune_neighbors(clusters.n_clusters);
  result.n_neighbors = effective.n_neighbors;

  const auto coords = embed_coordinates(points, effective, stop);
  if (coords.size() != vectors.size()) return {};
  for (size_t i = 0; i < vectors.size(); ++i) {
    result.points.push_back({vectors[i].rule_id, coords[i][0], coords[i][1], clusters.labels[i]});
  }
  return result;
}

}  // namespace rulescope
