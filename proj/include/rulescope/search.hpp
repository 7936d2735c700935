#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stop_token>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/ensemble.hpp"

namespace rulescope {

struct IntRange {
  int lo = 0;
  int hi = 0;

  bool contains(int v) const { return lo <= v && v <= hi; }
  bool operator==(const IntRange&) const = default;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  bool operator==(const RealRange&) const = default;
};

/// Inclusive hyperparameter ranges.
struct SearchSpace {
  IntRange n_estimators{2, 20};
  IntRange max_depth{10, 25};
  IntRange min_samples_leaf{1, 10};
  IntRange max_features{1, 1};  // random forests only
  RealRange learning_rate{0.1, 0.4};  // AdaBoost only

  bool operator==(const SearchSpace&) const = default;

  void validate() const;
  bool contains(Algorithm algorithm, const HyperParams& params) const;
};

/// Default ranges; max_features spans [ceil(sqrt(n)), n - 1], collapsed to
/// a single valid value when n is too small for that range.
SearchSpace default_space(size_t num_features);

struct SearchRequest {
  Algorithm algorithm = Algorithm::kRandomForest;
  int iterations = 10;
  SearchSpace space;
  uint64_t seed = 0;
};

/// Independent uniform draws; integers over their inclusive ranges and the
/// learning rate continuously. Each parameter set carries its own seed.
std::vector<HyperParams> sample(Algorithm algorithm, const SearchSpace& space, uint64_t seed, int iterations);

struct CandidateFailure {
  size_t candidate = 0;
  std::string message;
};

struct SearchResult {
  std::vector<TrainedModel> models;  // ascending overall score
  std::vector<CandidateFailure> failures;
};

struct SearchOptions {
  int first_id = 1;       // models are named <tag><first_id>, <tag><first_id + 1>, ...
  unsigned workers = 0;   // 0 picks hardware concurrency
  std::atomic<int>* progress = nullptr;
  std::stop_token stop;
};

/// Scores every candidate by cross-validation, then refits it on the whole
/// training set. Candidate ids follow the sampling order, independent of
/// which worker finished first.
SearchResult run_search(const SearchRequest& request, const Dataset& train, const std::vector<Fold>& folds,
                        const SearchOptions& options = {});

/// Runs fn(i) for i in [0, count) on a bounded pool of threads.
void parallel_for(size_t count, unsigned workers, const std::function<void(size_t)>& fn);

}  // namespace rulescope
