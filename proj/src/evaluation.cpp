#include "rulescope/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include "rulescope/error.hpp"

namespace rulescope {

ModelMetrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, size_t num_classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::kInvalidArgument, "prediction length mismatch");
  if (truth.empty()) throw Error(ErrorKind::kInvalidArgument, "no predictions to score");
  ModelMetrics m;
  m.per_class_fp.assign(num_classes, 0);
  m.per_class_fn.assign(num_classes, 0);
  std::vector<size_t> tp(num_classes, 0);
  size_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<size_t>(truth[i]);
    const auto p = static_cast<size_t>(predicted[i]);
    if (t == p) {
      ++correct;
      ++tp[t];
    } else {
      ++m.per_class_fn[t];
      ++m.per_class_fp[p];
    }
  }
  double precision = 0.0;
  double recall = 0.0;
  for (size_t c = 0; c < num_classes; ++c) {
    const size_t predicted_c = tp[c] + m.per_class_fp[c];
    const size_t actual_c = tp[c] + m.per_class_fn[c];
    if (predicted_c > 0) precision += static_cast<double>(tp[c]) / static_cast<double>(predicted_c);
    if (actual_c > 0) recall += static_cast<double>(tp[c]) / static_cast<double>(actual_c);
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.precision_macro = precision / static_cast<double>(num_classes);
  m.recall_macro = recall / static_cast<double>(num_classes);
  m.overall_score = (m.accuracy + m.precision_macro + m.recall_macro) / 3.0;
  m.cv_predictions.assign(predicted.begin(), predicted.end());
  return m;
}

ModelMetrics evaluate_cv(const Dataset& train, const std::vector<Fold>& folds, Algorithm algorithm,
                         const HyperParams& params) {
  if (folds.empty()) throw Error(ErrorKind::kInvalidArgument, "no folds");
  std::vector<int> oof(train.rows(), -1);
  for (const auto& fold : folds) {
    const Dataset fit = train.subset(fold.fit);
    const TrainedModel model = fit_model(algorithm, fit, params);
    for (size_t i : fold.holdout) oof[i] = predict(model, train.row(i)).label;
  }
  for (int p : oof) {
    if (p < 0) throw Error(ErrorKind::kInvalidArgument, "folds do not cover the training set");
  }
  return compute_metrics(train.labels, oof, train.num_classes());
}

std::vector<ConfusionTransition> confusion_transitions(const std::vector<const TrainedModel*>& ordered) {
  std::vector<ConfusionTransition> out;
  for (size_t k = 1; k < ordered.size(); ++k) {
    const auto& from = ordered[k - 1]->metrics;
    const auto& to = ordered[k]->metrics;
    ConfusionTransition t;
    t.from_model = ordered[k - 1]->id;
    t.to_model = ordered[k]->id;
    for (size_t c = 0; c < to.per_class_fp.size(); ++c) {
      t.per_class_delta_fp.push_back(static_cast<long>(to.per_class_fp[c]) - static_cast<long>(from.per_class_fp[c]));
      t.per_class_delta_fn.push_back(static_cast<long>(to.per_class_fn[c]) - static_cast<long>(from.per_class_fn[c]));
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

// "RF2" before "RF10": compare the alphabetic prefix, then the numeric tail.
bool id_less(const std::string& a, const std::string& b) {
  const auto split = [](const std::string& s) {
    size_t k = s.size();
    while (k > 0 && std::isdigit(static_cast<unsigned char>(s[k - 1]))) --k;
    return std::pair{s.substr(0, k), s.substr(k)};
  };
  const auto [pa, na] = split(a);
  const auto [pb, nb] = split(b);
  if (pa != pb) return pa < pb;
  if (na.size() != nb.size()) return na.size() < nb.size();
  return na < nb;
}

}  // namespace

std::vector<const TrainedModel*> sorted_view(const std::vector<TrainedModel>& models) {
  std::vector<const TrainedModel*> view;
  for (const auto& m : models) view.push_back(&m);
  std::stable_sort(view.begin(), view.end(), [](const TrainedModel* a, const TrainedModel* b) {
    if (a->metrics.overall_score != b->metrics.overall_score) return a->metrics.overall_score < b->metrics.overall_score;
    return id_less(a->id, b->id);
  });
  return view;
}

std::vector<std::string> sort_models(const std::vector<TrainedModel>& models) {
  std::vector<std::string> ids;
  for (const auto* m : sorted_view(models)) ids.push_back(m->id);
  return ids;
}

}  // namespace rulescope
