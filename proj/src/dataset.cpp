#include "rulescope/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rulescope/error.hpp"
#include "rulescope/rng.hpp"

namespace rulescope {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(15);
  out << v;
  return out.str();
}

}  // namespace

std::vector<size_t> Dataset::class_counts() const {
  std::vector<size_t> counts(num_classes(), 0);
  for (int label : labels) ++counts[static_cast<size_t>(label)];
  return counts;
}

void Dataset::recompute_bounds() {
  const size_t n = cols();
  bounds.assign(n, FeatureBounds{});
  if (rows() == 0) return;
  for (size_t f = 0; f < n; ++f) {
    double lo = at(0, f);
    double hi = lo;
    for (size_t i = 1; i < rows(); ++i) {
      lo = std::min(lo, at(i, f));
      hi = std::max(hi, at(i, f));
    }
    bounds[f] = {lo, hi};
  }
}

Dataset Dataset::subset(std::span<const size_t> indices) const {
  Dataset out;
  out.feature_names = feature_names;
  out.class_names = class_names;
  out.values.reserve(indices.size() * cols());
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    if (i >= rows()) throw Error(ErrorKind::kInvalidArgument, "subset index out of range");
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    if (!numeric_target.empty()) out.numeric_target.push_back(numeric_target[i]);
  }
  out.recompute_bounds();
  return out;
}

void Dataset::validate() const {
  if (cols() == 0) throw Error(ErrorKind::kInvalidArgument, "dataset has no features");
  if (num_classes() < 2) throw Error(ErrorKind::kInvalidArgument, "dataset needs at least 2 classes");
  if (values.size() != rows() * cols()) {
    throw Error(ErrorKind::kInvalidArgument, "feature matrix shape does not match labels");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<size_t>(label) >= num_classes()) {
      throw Error(ErrorKind::kInvalidArgument, "label index out of range");
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "non-finite feature value");
  }
  if (bounds.size() != cols()) throw Error(ErrorKind::kInvalidArgument, "feature bounds missing");
  for (const auto& b : bounds) {
    if (b.min > b.max) throw Error(ErrorKind::kInvalidArgument, "feature bounds inverted");
  }
}

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Skip a UTF-8 byte order mark and trailing blank lines.
  if (!lines.empty() && lines.front().starts_with("\xEF\xBB\xBF")) lines.front().remove_prefix(3);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty() || trim(lines.front()).empty()) {
    throw Error(ErrorKind::kParse, "missing header row");
  }

  const auto header = split_csv_line(lines.front());
  std::set<std::string> seen;
  std::optional<size_t> target_col;
  std::vector<bool> ignored(header.size(), false);
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    if (name.empty()) throw Error(ErrorKind::kParse, "empty header name in column " + std::to_string(c + 1));
    if (!seen.insert(name).second) throw Error(ErrorKind::kParse, "duplicate header '" + name + "'");
    if (name == options.target_column) target_col = c;
    if (std::find(options.ignore_columns.begin(), options.ignore_columns.end(), name) !=
        options.ignore_columns.end()) {
      ignored[c] = true;
    }
  }
  if (!target_col) throw Error(ErrorKind::kParse, "target column '" + options.target_column + "' not found");

  Dataset ds;
  for (size_t c = 0; c < header.size(); ++c) {
    if (c != *target_col && !ignored[c]) ds.feature_names.emplace_back(trim(header[c]));
  }
  if (ds.feature_names.empty()) throw Error(ErrorKind::kParse, "no feature columns");

  std::vector<std::string> raw_targets;
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) +
                                         " fields, expected " + std::to_string(header.size()));
    }
    for (size_t c = 0; c < fields.size(); ++c) {
      if (c == *target_col) {
        raw_targets.emplace_back(trim(fields[c]));
        continue;
      }
      if (ignored[c]) continue;
      const auto v = parse_number(fields[c]);
      if (!v) {
        throw Error(ErrorKind::kParse, "unparseable value '" + fields[c] + "' at line " + std::to_string(r + 1) +
                                           ", column '" + std::string(trim(header[c])) + "'");
      }
      ds.values.push_back(*v);
    }
  }
  if (raw_targets.empty()) throw Error(ErrorKind::kParse, "no data rows");

  std::vector<double> numeric;
  numeric.reserve(raw_targets.size());
  for (const auto& t : raw_targets) {
    const auto v = parse_number(t);
    if (!v) {
      numeric.clear();
      break;
    }
    numeric.push_back(*v);
  }

  if (!numeric.empty()) {
    std::map<double, int> index;
    for (double v : numeric) index.emplace(v, 0);
    int next = 0;
    for (auto& [value, idx] : index) {
      idx = next++;
      ds.class_names.push_back(format_number(value));
    }
    for (double v : numeric) ds.labels.push_back(index.at(v));
    ds.numeric_target = std::move(numeric);
  } else {
    std::unordered_map<std::string, int> index;
    for (const auto& t : raw_targets) {
      auto [it, inserted] = index.emplace(t, static_cast<int>(ds.class_names.size()));
      if (inserted) ds.class_names.push_back(t);
      ds.labels.push_back(it->second);
    }
  }
  if (ds.class_names.size() < 2) throw Error(ErrorKind::kInvalidArgument, "target column is constant");

  ds.recompute_bounds();
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options);
}

Discretization discretize_target(const Dataset& ds, int bins, const std::string& prefix) {
  if (bins < 2) throw Error(ErrorKind::kInvalidArgument, "bins must be at least 2");
  if (ds.numeric_target.size() != ds.rows() || ds.rows() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "target is not numeric");
  }
  const auto [lo_it, hi_it] = std::minmax_element(ds.numeric_target.begin(), ds.numeric_target.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorKind::kInvalidArgument, "target is constant");

  const double width = (hi - lo) / bins;
  Discretization out;
  for (int b = 1; b < bins; ++b) out.edges.push_back(lo + b * width);

  out.dataset = ds;
  out.dataset.class_names.clear();
  for (int b = 1; b <= bins; ++b) out.dataset.class_names.push_back(prefix + std::to_string(b));
  for (size_t i = 0; i < ds.rows(); ++i) {
    const double v = ds.numeric_target[i];
    const auto bin = std::upper_bound(out.edges.begin(), out.edges.end(), v) - out.edges.begin();
    out.dataset.labels[i] = static_cast<int>(bin);
  }
  return out;
}

std::vector<size_t> stratified_quotas(std::span<const size_t> class_counts, double train_fraction) {
  const size_t total = std::accumulate(class_counts.begin(), class_counts.end(), size_t{0});
  const auto target = static_cast<size_t>(std::llround(static_cast<double>(total) * train_fraction));
  std::vector<size_t> quotas(class_counts.size());
  std::vector<double> remainders(class_counts.size());
  size_t assigned = 0;
  for (size_t c = 0; c < class_counts.size(); ++c) {
    const double exact = static_cast<double>(class_counts[c]) * train_fraction;
    quotas[c] = static_cast<size_t>(std::floor(exact));
    remainders[c] = exact - std::floor(exact);
    assigned += quotas[c];
  }
  std::vector<size_t> order(class_counts.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return remainders[a] > remainders[b]; });
  for (size_t k = 0; assigned < target && k < order.size(); ++k) {
    const size_t c = order[k];
    if (quotas[c] < class_counts[c]) {
      ++quotas[c];
      ++assigned;
    }
  }
  return quotas;
}

namespace {

std::vector<std::vector<size_t>> members_by_class(const Dataset& ds) {
  std::vector<std::vector<size_t>> members(ds.num_classes());
  for (size_t i = 0; i < ds.rows(); ++i) members[static_cast<size_t>(ds.labels[i])].push_back(i);
  return members;
}

}  // namespace

TrainTestSplit stratified_split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "train_fraction must lie in (0, 1)");
  }
  auto members = members_by_class(ds);
  std::vector<size_t> counts;
  for (size_t c = 0; c < members.size(); ++c) {
    if (members[c].size() < 2) {
      throw Error(ErrorKind::kInvalidArgument, "class '" + ds.class_names[c] + "' has fewer than 2 members");
    }
    counts.push_back(members[c].size());
  }
  const auto quotas = stratified_quotas(counts, spec.train_fraction);

  Rng rng(spec.seed);
  TrainTestSplit out;
  for (size_t c = 0; c < members.size(); ++c) {
    rng.shuffle(members[c]);
    out.train_indices.insert(out.train_indices.end(), members[c].begin(), members[c].begin() + quotas[c]);
    out.test_indices.insert(out.test_indices.end(), members[c].begin() + quotas[c], members[c].end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  out.train = ds.subset(out.train_indices);
  out.test = ds.subset(out.test_indices);
  return out;
}

std::vector<Fold> make_folds(const Dataset& train, const SplitSpec& spec) {
  if (spec.folds < 2) throw Error(ErrorKind::kInvalidArgument, "folds must be at least 2");
  const auto k = static_cast<size_t>(spec.folds);
  auto members = members_by_class(train);
  for (size_t c = 0; c < members.size(); ++c) {
    if (members[c].size() < k) {
      throw Error(ErrorKind::kInvalidArgument, "folds (" + std::to_string(k) + ") exceed the size of class '" +
                                                   train.class_names[c] + "'");
    }
  }

  // Deal each shuffled class round-robin, continuing the rotation across
  // classes so fold sizes differ by at most one.
  Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::vector<size_t>> holdouts(k);
  size_t cursor = 0;
  for (auto& m : members) {
    rng.shuffle(m);
    for (size_t i : m) holdouts[cursor++ % k].push_back(i);
  }

  std::vector<Fold> folds(k);
  std::vector<size_t> owner(train.rows());
  for (size_t f = 0; f < k; ++f) {
    for (size_t i : holdouts[f]) owner[i] = f;
  }
  for (size_t f = 0; f < k; ++f) {
    std::sort(holdouts[f].begin(), holdouts[f].end());
    folds[f].holdout = holdouts[f];
    for (size_t i = 0; i < train.rows(); ++i) {
      if (owner[i] != f) folds[f].fit.push_back(i);
    }
  }
  return folds;
}

}  // namespace rulescope
