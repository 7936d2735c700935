#pragma once

#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/ensemble.hpp"
#include "rulescope/metrics.hpp"

namespace rulescope {

/// Fits on each fold's fit rows, predicts its holdout, and scores the
/// concatenated out-of-fold predictions.
ModelMetrics evaluate_cv(const Dataset& train, const std::vector<Fold>& folds, Algorithm algorithm,
                         const HyperParams& params);

struct ConfusionTransition {
  std::string from_model;
  std::string to_model;
  std::vector<long> per_class_delta_fp;
  std::vector<long> per_class_delta_fn;
};

/// Deltas (to - from) between consecutive models, in the given order.
std::vector<ConfusionTransition> confusion_transitions(const std::vector<const TrainedModel*>& ordered);

/// Ascending overall score, ties by id.
std::vector<std::string> sort_models(const std::vector<TrainedModel>& models);
std::vector<const TrainedModel*> sorted_view(const std::vector<TrainedModel>& models);

}  // namespace rulescope
