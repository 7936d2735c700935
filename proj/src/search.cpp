#include "rulescope/search.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "rulescope/error.hpp"
#include "rulescope/evaluation.hpp"
#include "rulescope/rng.hpp"

namespace rulescope {

void SearchSpace::validate() const {
  const auto check = [](const auto& r, const char* name, auto floor) {
    if (r.lo > r.hi) throw Error(ErrorKind::kInvalidArgument, std::string(name) + " range is empty");
    if (r.lo < floor) throw Error(ErrorKind::kInvalidArgument, std::string(name) + " range is out of domain");
  };
  check(n_estimators, "n_estimators", 1);
  check(max_depth, "max_depth", 1);
  check(min_samples_leaf, "min_samples_leaf", 1);
  check(max_features, "max_features", 1);
  check(learning_rate, "learning_rate", 0.0);
  if (!(learning_rate.lo > 0.0)) throw Error(ErrorKind::kInvalidArgument, "learning_rate must be positive");
}

bool SearchSpace::contains(Algorithm algorithm, const HyperParams& p) const {
  if (!n_estimators.contains(p.n_estimators) || !max_depth.contains(p.max_depth) ||
      !min_samples_leaf.contains(p.min_samples_leaf)) {
    return false;
  }
  if (algorithm == Algorithm::kRandomForest) return p.max_features && max_features.contains(*p.max_features);
  return learning_rate.contains(p.learning_rate);
}

SearchSpace default_space(size_t num_features) {
  SearchSpace space;
  const int n = static_cast<int>(num_features);
  const int hi = std::max(1, n - 1);
  const int lo = std::min(hi, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  space.max_features = {lo, hi};
  return space;
}

std::vector<HyperParams> sample(Algorithm algorithm, const SearchSpace& space, uint64_t seed, int iterations) {
  space.validate();
  if (iterations < 1) throw Error(ErrorKind::kInvalidArgument, "iterations must be at least 1");
  Rng rng(seed);
  std::vector<HyperParams> out;
  for (int i = 0; i < iterations; ++i) {
    HyperParams p;
    p.n_estimators = static_cast<int>(rng.uniform_int(space.n_estimators.lo, space.n_estimators.hi));
    p.max_depth = static_cast<int>(rng.uniform_int(space.max_depth.lo, space.max_depth.hi));
    p.min_samples_leaf = static_cast<int>(rng.uniform_int(space.min_samples_leaf.lo, space.min_samples_leaf.hi));
    const auto max_features = static_cast<int>(rng.uniform_int(space.max_features.lo, space.max_features.hi));
    const double learning_rate = rng.uniform_real(space.learning_rate.lo, space.learning_rate.hi);
    if (algorithm == Algorithm::kRandomForest) {
      p.max_features = max_features;
      p.learning_rate = 1.0;
    } else {
      p.learning_rate = learning_rate;
    }
    p.seed = rng.next();
    out.push_back(p);
  }
  return out;
}

void parallel_for(size_t count, unsigned workers, const std::function<void(size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<size_t>(workers, count));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

SearchResult run_search(const SearchRequest& request, const Dataset& train, const std::vector<Fold>& folds,
                        const SearchOptions& options) {
  const auto candidates = sample(request.algorithm, request.space, request.seed, request.iterations);
  std::vector<std::optional<TrainedModel>> fitted(candidates.size());
  std::vector<std::string> errors(candidates.size());

  parallel_for(candidates.size(), options.workers, [&](size_t i) {
    if (options.stop.stop_requested()) {
      errors[i] = "cancelled";
      return;
    }
    try {
      TrainedModel model = fit_model(request.algorithm, train, candidates[i]);
      model.metrics = evaluate_cv(train, folds, request.algorithm, candidates[i]);
      model.id = std::string(algorithm_tag(request.algorithm)) + std::to_string(options.first_id + static_cast<int>(i));
      model.active = true;
      fitted[i] = std::move(model);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
    if (options.progress) ++*options.progress;
  });

  SearchResult result;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (fitted[i]) {
      result.models.push_back(std::move(*fitted[i]));
    } else {
      result.failures.push_back({i, errors[i]});
    }
  }
  if (result.models.empty()) {
    throw Error(ErrorKind::kTraining, "every search candidate failed" +
                                          (result.failures.empty() ? std::string() : ": " + result.failures[0].message));
  }
  std::vector<TrainedModel> ordered;
  for (const auto* m : sorted_view(result.models)) ordered.push_back(*m);
  result.models = std::move(ordered);
  return result;
}

}  // namespace rulescope
