#include "rulescope/ensemble.hpp"

#include <cmath>
#include <numeric>

#include "rulescope/error.hpp"
#include "rulescope/rng.hpp"

namespace rulescope {

namespace {

int argmax(std::span<const double> scores) {
  int best = 0;
  for (size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[static_cast<size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

void require_two_classes(const Dataset& train) {
  if (train.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "training set is empty");
  size_t present = 0;
  for (size_t count : train.class_counts()) present += count > 0 ? 1 : 0;
  if (present < 2) throw Error(ErrorKind::kTraining, "training set contains a single class");
}

void require_estimators(const HyperParams& params) {
  if (params.n_estimators < 1) throw Error(ErrorKind::kInvalidArgument, "n_estimators must be at least 1");
}

}  // namespace

const char* algorithm_tag(Algorithm a) { return a == Algorithm::kRandomForest ? "RF" : "AB"; }

Algorithm parse_algorithm(std::string_view tag) {
  if (tag == "RF" || tag == "rf") return Algorithm::kRandomForest;
  if (tag == "AB" || tag == "ab") return Algorithm::kAdaBoost;
  throw Error(ErrorKind::kInvalidArgument, "unknown algorithm '" + std::string(tag) + "'");
}

size_t TrainedModel::decision_count() const {
  size_t total = 0;
  for (const auto& t : trees) total += t.leaf_count();
  return total;
}

double stage_weight(double weighted_error, size_t num_classes, double learning_rate) {
  if (weighted_error <= 0.0) return learning_rate * kMaxStageWeight;
  const double raw = std::log((1.0 - weighted_error) / weighted_error) + std::log(static_cast<double>(num_classes) - 1.0);
  return learning_rate * std::min(raw, kMaxStageWeight);
}

TrainedModel fit_rf(const Dataset& train, const HyperParams& params) {
  require_two_classes(train);
  require_estimators(params);
  TrainedModel model;
  model.algorithm = Algorithm::kRandomForest;
  model.params = params;

  const size_t n = train.rows();
  const std::vector<double> weights(n, 1.0);
  Rng rng(params.seed);
  std::vector<size_t> bootstrap(n);
  for (int m = 0; m < params.n_estimators; ++m) {
    TreeParams tp{params.max_depth, params.min_samples_leaf, params.max_features, rng.next()};
    for (auto& r : bootstrap) r = rng.uniform_index(n);
    model.trees.push_back(fit_tree(train, bootstrap, weights, tp));
    model.stage_weights.push_back(1.0);
  }
  return model;
}

TrainedModel fit_ab(const Dataset& train, const HyperParams& params, BoostingTrace* trace) {
  require_two_classes(train);
  require_estimators(params);
  if (!(params.learning_rate > 0.0)) throw Error(ErrorKind::kInvalidArgument, "learning_rate must be positive");
  TrainedModel model;
  model.algorithm = Algorithm::kAdaBoost;
  model.params = params;
  model.params.max_features.reset();

  const size_t n = train.rows();
  const size_t num_classes = train.num_classes();
  const double unlearnable = 1.0 - 1.0 / static_cast<double>(num_classes);
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  std::vector<size_t> rows(n);
  std::iota(rows.begin(), rows.end(), size_t{0});
  std::vector<bool> missed(n);
  Rng rng(params.seed);

  for (int m = 0; m < params.n_estimators; ++m) {
    TreeParams tp{params.max_depth, params.min_samples_leaf, std::nullopt, rng.next()};
    DecisionTree tree = fit_tree(train, rows, weights, tp);

    double err = 0.0;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      missed[i] = predict(tree, train.row(i)).label != train.labels[i];
      if (missed[i]) err += weights[i];
      total += weights[i];
    }
    err /= total;

    if (err >= unlearnable) {
      if (m == 0) throw Error(ErrorKind::kTraining, "boosting failed to find weak learner");
      break;
    }

    const double alpha = stage_weight(err, num_classes, params.learning_rate);
    model.trees.push_back(std::move(tree));
    model.stage_weights.push_back(alpha);
    if (trace) trace->stage_errors.push_back(err);

    if (err <= 0.0) {
      if (trace) trace->weights_after_stage.push_back(weights);
      break;
    }

    const double boost = std::exp(alpha);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (missed[i]) weights[i] *= boost;
      sum += weights[i];
    }
    for (auto& w : weights) w /= sum;
    if (trace) trace->weights_after_stage.push_back(weights);
  }
  return model;
}

TrainedModel fit_model(Algorithm algorithm, const Dataset& train, const HyperParams& params) {
  return algorithm == Algorithm::kRandomForest ? fit_rf(train, params) : fit_ab(train, params);
}

EnsemblePrediction predict_rf(const TrainedModel& model, std::span<const double> instance) {
  EnsemblePrediction out;
  out.scores.assign(model.trees.empty() ? 0 : model.trees.front().num_classes, 0.0);
  for (const auto& tree : model.trees) out.scores[static_cast<size_t>(predict(tree, instance).label)] += 1.0;
  out.label = argmax(out.scores);
  return out;
}

EnsemblePrediction predict_ab(const TrainedModel& model, std::span<const double> instance) {
  EnsemblePrediction out;
  out.scores.assign(model.trees.empty() ? 0 : model.trees.front().num_classes, 0.0);
  for (size_t m = 0; m < model.trees.size(); ++m) {
    out.scores[static_cast<size_t>(predict(model.trees[m], instance).label)] += model.stage_weights[m];
  }
  out.label = argmax(out.scores);
  return out;
}

EnsemblePrediction predict(const TrainedModel& model, std::span<const double> instance) {
  return model.algorithm == Algorithm::kRandomForest ? predict_rf(model, instance) : predict_ab(model, instance);
}

std::vector<int> predict_all(const TrainedModel& model, const Dataset& ds) {
  std::vector<int> out(ds.rows());
  for (size_t i = 0; i < ds.rows(); ++i) out[i] = predict(model, ds.row(i)).label;
  return out;
}

}  // namespace rulescope
