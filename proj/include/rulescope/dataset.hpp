#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rulescope {

struct FeatureBounds {
  double min = 0.0;
  double max = 0.0;

  bool operator==(const FeatureBounds&) const = default;
};

/// Tabular classification data, row-major.
///
/// Every label is < class_names.size(), every value is finite and
/// bounds[f] spans the observed values of column f. A numeric target column
/// is kept in numeric_target so it can be discretized after loading.
struct Dataset {
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<FeatureBounds> bounds;
  std::vector<double> numeric_target;

  size_t rows() const { return labels.size(); }
  size_t cols() const { return feature_names.size(); }
  size_t num_classes() const { return class_names.size(); }

  std::span<const double> row(size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
  double at(size_t i, size_t f) const { return values[i * cols() + f]; }

  std::vector<size_t> class_counts() const;

  /// Rows in the given order; bounds are recomputed over the subset.
  Dataset subset(std::span<const size_t> indices) const;

  void recompute_bounds();

  /// Throws Error(kInvalidArgument) when an invariant does not hold.
  void validate() const;
};

struct CsvOptions {
  std::string target_column;
  std::vector<std::string> ignore_columns;
};

/// Reads a comma-separated file with a header row. Categorical targets map
/// to class indices in order of first appearance; numeric targets map their
/// distinct values in ascending order and are also kept in numeric_target.
Dataset load_csv(const std::string& path, const CsvOptions& options);
Dataset parse_csv(std::string_view text, const CsvOptions& options);

struct Discretization {
  Dataset dataset;
  std::vector<double> edges;  // interior edges, ascending
};

/// Equal-width binning of numeric_target over [min, max]. Interior edges
/// belong to the upper bin and the maximum to the top bin. Classes are
/// named prefix + "1" .. prefix + bins in ascending order of target.
Discretization discretize_target(const Dataset& ds, int bins,
                                 const std::string& prefix = "Level-");

struct SplitSpec {
  double train_fraction = 0.9;
  int folds = 3;
  uint64_t seed = 0;
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<size_t> train_indices;
  std::vector<size_t> test_indices;
};

/// Per-class training quotas by largest remainder: every class receives
/// floor(count * fraction) and the leftover seats up to round(N * fraction)
/// go to the largest fractional parts (lower class index on ties).
std::vector<size_t> stratified_quotas(std::span<const size_t> class_counts,
                                      double train_fraction);

TrainTestSplit stratified_split(const Dataset& ds, const SplitSpec& spec);

struct Fold {
  std::vector<size_t> fit;
  std::vector<size_t> holdout;
};

std::vector<Fold> make_folds(const Dataset& train, const SplitSpec& spec);

}  // namespace rulescope
