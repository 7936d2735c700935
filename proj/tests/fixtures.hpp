#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "rulescope/dataset.hpp"
#include "rulescope/rng.hpp"

namespace fixtures {

inline rulescope::Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                       size_t num_classes) {
  rulescope::Dataset ds;
  const size_t n = rows.empty() ? 0 : rows.front().size();
  for (size_t f = 0; f < n; ++f) ds.feature_names.push_back("f" + std::to_string(f));
  for (size_t c = 0; c < num_classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  for (const auto& r : rows) ds.values.insert(ds.values.end(), r.begin(), r.end());
  ds.labels = labels;
  ds.recompute_bounds();
  return ds;
}

/// Uniform features on a coarse grid (so ties occur) and random labels, with
/// every class present.
inline rulescope::Dataset random_dataset(uint64_t seed, size_t rows, size_t cols, size_t classes, int grid = 10) {
  rulescope::Rng rng(seed);
  std::vector<std::vector<double>> x(rows, std::vector<double>(cols));
  std::vector<int> y(rows);
  for (size_t i = 0; i < rows; ++i) {
    for (auto& v : x[i]) v = static_cast<double>(rng.uniform_int(0, grid)) / grid;
    y[i] = i < classes ? static_cast<int>(i) : static_cast<int>(rng.uniform_index(classes));
  }
  return make_dataset(x, y, classes);
}

/// Labels derived from a noisy threshold rule so trees have structure to find.
inline rulescope::Dataset structured_dataset(uint64_t seed, size_t rows, size_t cols, size_t classes) {
  rulescope::Rng rng(seed);
  std::vector<std::vector<double>> x(rows, std::vector<double>(cols));
  std::vector<int> y(rows);
  for (size_t i = 0; i < rows; ++i) {
    for (auto& v : x[i]) v = rng.uniform_real();
    const double s = x[i][0] + 0.5 * x[i][cols > 1 ? 1 : 0] + 0.2 * rng.normal();
    y[i] = std::min<int>(static_cast<int>(classes) - 1, std::max(0, static_cast<int>(s / 1.5 * classes)));
  }
  for (size_t c = 0; c < classes && c < rows; ++c) y[c] = static_cast<int>(c);
  return make_dataset(x, y, classes);
}

inline std::string data_path(const std::string& name) { return std::string(RULESCOPE_DATA_DIR) + "/" + name; }

}  // namespace fixtures
