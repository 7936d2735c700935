#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rulescope {

/// Classification quality over one prediction vector. overall_score is the
/// arithmetic mean of accuracy and the macro-averaged precision and recall.
struct ModelMetrics {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double overall_score = 0.0;
  std::vector<size_t> per_class_fp;
  std::vector<size_t> per_class_fn;
  std::vector<int> cv_predictions;

  bool operator==(const ModelMetrics&) const = default;
};

/// Classes never predicted contribute precision 0; classes absent from the
/// truth contribute recall 0.
ModelMetrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, size_t num_classes);

}  // namespace rulescope
