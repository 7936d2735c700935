#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/metrics.hpp"
#include "rulescope/tree.hpp"

namespace rulescope {

enum class Algorithm { kRandomForest, kAdaBoost };

const char* algorithm_tag(Algorithm a);  // "RF" / "AB"
Algorithm parse_algorithm(std::string_view tag);

/// Hyperparameters shared by both learners. max_features only applies to
/// random forests; learning_rate only to AdaBoost.
struct HyperParams {
  int n_estimators = 10;
  int max_depth = 10;
  int min_samples_leaf = 1;
  std::optional<int> max_features;
  double learning_rate = 1.0;
  uint64_t seed = 0;

  bool operator==(const HyperParams&) const = default;
};

struct TrainedModel {
  std::string id;
  Algorithm algorithm = Algorithm::kRandomForest;
  HyperParams params;
  std::vector<DecisionTree> trees;
  std::vector<double> stage_weights;
  ModelMetrics metrics;
  bool active = true;

  size_t decision_count() const;
};

/// Stage weight cap, reached when a stage classifies its weights perfectly.
inline const double kMaxStageWeight = 27.631021115928547;  // ln(1e12)

/// learning_rate * (log((1 - err) / err) + log(C - 1)); err == 0 yields the
/// cap scaled by the learning rate.
double stage_weight(double weighted_error, size_t num_classes, double learning_rate);

TrainedModel fit_rf(const Dataset& train, const HyperParams& params);

/// Per-stage diagnostics returned alongside an AdaBoost fit.
struct BoostingTrace {
  std::vector<double> stage_errors;
  std::vector<std::vector<double>> weights_after_stage;  // normalized
};

TrainedModel fit_ab(const Dataset& train, const HyperParams& params, BoostingTrace* trace = nullptr);

TrainedModel fit_model(Algorithm algorithm, const Dataset& train, const HyperParams& params);

struct EnsemblePrediction {
  int label = 0;
  std::vector<double> scores;  // votes (RF) or summed stage weights (AB)
};

EnsemblePrediction predict_rf(const TrainedModel& model, std::span<const double> instance);
EnsemblePrediction predict_ab(const TrainedModel& model, std::span<const double> instance);
EnsemblePrediction predict(const TrainedModel& model, std::span<const double> instance);

std::vector<int> predict_all(const TrainedModel& model, const Dataset& ds);

}  // namespace rulescope
