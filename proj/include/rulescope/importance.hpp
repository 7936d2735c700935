#pragma once

#include <map>
#include <string>
#include <vector>

#include "rulescope/ensemble.hpp"

namespace rulescope {

/// Mean decrease in impurity. Each split adds (node weight / root weight) x
/// Gini decrease to its feature; tree vectors are normalized, averaged with
/// the stage weights and renormalized to sum 1. A model without any split
/// gets the uniform vector.
std::vector<double> model_importance(const TrainedModel& model, size_t num_features);

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

struct ImportanceTable {
  std::vector<std::string> feature_names;
  std::map<std::string, std::vector<double>> per_model;
  // [feature][algorithm tag] over the active models of that algorithm
  std::vector<std::map<std::string, BoxStats>> per_algorithm_stats;
  std::vector<double> active_mean;
  std::vector<double> all_mean;
  std::vector<double> delta;
  std::vector<size_t> display_order;
};

ImportanceTable aggregate(const std::vector<TrainedModel>& models, const std::vector<std::string>& active_ids,
                          const std::vector<std::string>& feature_names);

}  // namespace rulescope
