#include "rulescope/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "rulescope/error.hpp"

namespace rulescope {

namespace {

int class_index(const std::string& name, const std::vector<std::string>& class_names) {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) throw Error(ErrorKind::kInvalidArgument, "unknown class '" + name + "'");
  return static_cast<int>(it - class_names.begin());
}

Json intervals_to_json(const std::vector<Interval>& intervals) {
  Json out = Json::array();
  for (const auto& iv : intervals) out.push_back({iv.lo, iv.hi});
  return out;
}

}  // namespace

void to_json(Json& j, const Dataset& ds) {
  Json rows = Json::array();
  for (size_t i = 0; i < ds.rows(); ++i) {
    const auto r = ds.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  Json bounds = Json::array();
  for (const auto& b : ds.bounds) bounds.push_back({b.min, b.max});
  j = Json{{"feature_names", ds.feature_names},
           {"class_names", ds.class_names},
           {"values", std::move(rows)},
           {"labels", ds.labels},
           {"bounds", std::move(bounds)}};
  if (!ds.numeric_target.empty()) j["numeric_target"] = ds.numeric_target;
}

void from_json(const Json& j, Dataset& ds) {
  ds = Dataset{};
  j.at("feature_names").get_to(ds.feature_names);
  j.at("class_names").get_to(ds.class_names);
  j.at("labels").get_to(ds.labels);
  for (const auto& row : j.at("values")) {
    if (row.size() != ds.feature_names.size()) throw Error(ErrorKind::kParse, "dataset row has the wrong width");
    for (const auto& v : row) ds.values.push_back(v.get<double>());
  }
  if (j.contains("numeric_target")) j.at("numeric_target").get_to(ds.numeric_target);
  if (j.contains("bounds")) {
    for (const auto& b : j.at("bounds")) ds.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  } else {
    ds.recompute_bounds();
  }
  ds.validate();
}

void to_json(Json& j, const HyperParams& p) {
  j = Json{{"n_estimators", p.n_estimators},
           {"max_depth", p.max_depth},
           {"min_samples_leaf", p.min_samples_leaf},
           {"max_features", p.max_features ? Json(*p.max_features) : Json(nullptr)},
           {"learning_rate", p.learning_rate},
           {"seed", p.seed}};
}

void from_json(const Json& j, HyperParams& p) {
  j.at("n_estimators").get_to(p.n_estimators);
  j.at("max_depth").get_to(p.max_depth);
  j.at("min_samples_leaf").get_to(p.min_samples_leaf);
  if (j.contains("max_features") && !j.at("max_features").is_null()) {
    p.max_features = j.at("max_features").get<int>();
  } else {
    p.max_features.reset();
  }
  p.learning_rate = j.value("learning_rate", 1.0);
  p.seed = j.value("seed", uint64_t{0});
}

void to_json(Json& j, const ModelMetrics& m) {
  j = Json{{"accuracy", m.accuracy},
           {"precision", m.precision_macro},
           {"recall", m.recall_macro},
           {"overall_score", m.overall_score},
           {"per_class_fp", m.per_class_fp},
           {"per_class_fn", m.per_class_fn},
           {"cv_predictions", m.cv_predictions}};
}

void from_json(const Json& j, ModelMetrics& m) {
  j.at("accuracy").get_to(m.accuracy);
  j.at("precision").get_to(m.precision_macro);
  j.at("recall").get_to(m.recall_macro);
  j.at("overall_score").get_to(m.overall_score);
  j.at("per_class_fp").get_to(m.per_class_fp);
  j.at("per_class_fn").get_to(m.per_class_fn);
  j.at("cv_predictions").get_to(m.cv_predictions);
}

void to_json(Json& j, const DecisionTree& t) {
  Json nodes = Json::array();
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    Json node{{"id", i},
              {"feature", n.feature},
              {"class_counts", n.class_counts},
              {"prediction", n.prediction},
              {"weight", n.weight},
              {"samples", n.samples},
              {"impurity", n.impurity}};
    if (n.is_leaf()) {
      node["leaf"] = true;
    } else {
      node["threshold"] = n.threshold;
      node["left"] = n.left;
      node["right"] = n.right;
    }
    nodes.push_back(std::move(node));
  }
  j = Json{{"depth", t.depth}, {"num_features", t.num_features}, {"num_classes", t.num_classes}, {"nodes", nodes}};
}

void from_json(const Json& j, DecisionTree& t) {
  t = DecisionTree{};
  j.at("depth").get_to(t.depth);
  j.at("num_features").get_to(t.num_features);
  j.at("num_classes").get_to(t.num_classes);
  for (const auto& node : j.at("nodes")) {
    TreeNode n;
    node.at("feature").get_to(n.feature);
    node.at("class_counts").get_to(n.class_counts);
    node.at("prediction").get_to(n.prediction);
    node.at("weight").get_to(n.weight);
    node.at("samples").get_to(n.samples);
    node.at("impurity").get_to(n.impurity);
    if (!n.is_leaf()) {
      node.at("threshold").get_to(n.threshold);
      node.at("left").get_to(n.left);
      node.at("right").get_to(n.right);
    }
    t.nodes.push_back(std::move(n));
  }
  const auto size = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
      throw Error(ErrorKind::kParse, "tree node references a missing child");
    }
  }
  if (t.nodes.empty()) throw Error(ErrorKind::kParse, "tree has no nodes");
}

void to_json(Json& j, const TrainedModel& m) {
  j = Json{{"id", m.id},
           {"algorithm", algorithm_tag(m.algorithm)},
           {"params", m.params},
           {"stage_weights", m.stage_weights},
           {"trees", m.trees},
           {"metrics", m.metrics},
           {"active", m.active}};
}

void from_json(const Json& j, TrainedModel& m) {
  j.at("id").get_to(m.id);
  m.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  j.at("params").get_to(m.params);
  j.at("stage_weights").get_to(m.stage_weights);
  j.at("trees").get_to(m.trees);
  j.at("metrics").get_to(m.metrics);
  m.active = j.value("active", true);
  if (m.trees.empty()) throw Error(ErrorKind::kParse, "model " + m.id + " has no trees");
  if (m.stage_weights.size() != m.trees.size()) throw Error(ErrorKind::kParse, "stage weights do not match trees");
}

void to_json(Json& j, const SearchSpace& s) {
  j = Json{{"n_estimators", {s.n_estimators.lo, s.n_estimators.hi}},
           {"max_depth", {s.max_depth.lo, s.max_depth.hi}},
           {"min_samples_leaf", {s.min_samples_leaf.lo, s.min_samples_leaf.hi}},
           {"max_features", {s.max_features.lo, s.max_features.hi}},
           {"learning_rate", {s.learning_rate.lo, s.learning_rate.hi}}};
}

void from_json(const Json& j, SearchSpace& s) {
  const auto read_int = [&](const char* key, IntRange& r) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number_integer()) {
      r = {v.get<int>(), v.get<int>()};
    } else {
      r = {v.at(0).get<int>(), v.at(1).get<int>()};
    }
  };
  read_int("n_estimators", s.n_estimators);
  read_int("max_depth", s.max_depth);
  read_int("min_samples_leaf", s.min_samples_leaf);
  read_int("max_features", s.max_features);
  if (j.contains("learning_rate")) {
    const auto& v = j.at("learning_rate");
    if (v.is_number()) {
      s.learning_rate = {v.get<double>(), v.get<double>()};
    } else {
      s.learning_rate = {v.at(0).get<double>(), v.at(1).get<double>()};
    }
  }
}

void to_json(Json& j, const EmbeddingConfig& c) {
  j = Json{{"n_neighbors", c.n_neighbors}, {"min_dist", c.min_dist},         {"seed", c.seed},
           {"dbscan_eps", c.dbscan_eps},   {"dbscan_min_pts", c.dbscan_min_pts}, {"n_epochs", c.n_epochs}};
}

void from_json(const Json& j, EmbeddingConfig& c) {
  c.n_neighbors = j.value("n_neighbors", c.n_neighbors);
  c.min_dist = j.value("min_dist", c.min_dist);
  c.seed = j.value("seed", c.seed);
  c.dbscan_eps = j.value("dbscan_eps", c.dbscan_eps);
  c.dbscan_min_pts = j.value("dbscan_min_pts", c.dbscan_min_pts);
  c.n_epochs = j.value("n_epochs", c.n_epochs);
}

void to_json(Json& j, const BoxStats& s) {
  j = Json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}, {"mean", s.mean}};
}

void to_json(Json& j, const RuleFilter& f) {
  j = Json{{"min_support", f.min_support},
           {"max_support", f.max_support == std::numeric_limits<size_t>::max() ? Json(nullptr) : Json(f.max_support)},
           {"max_impurity", f.max_impurity},
           {"rounding_decimals", f.rounding_decimals}};
}

void from_json(const Json& j, RuleFilter& f) {
  f.min_support = j.value("min_support", f.min_support);
  if (j.contains("max_support")) {
    f.max_support = j.at("max_support").is_null() ? std::numeric_limits<size_t>::max() : j.at("max_support").get<size_t>();
  }
  f.max_impurity = j.value("max_impurity", f.max_impurity);
  f.rounding_decimals = j.value("rounding_decimals", f.rounding_decimals);
}

Json rule_to_json(const DecisionRule& rule, const std::vector<std::string>& class_names) {
  return Json{{"rule_id", rule.rule_id},
              {"model_id", rule.model_id},
              {"algorithm", algorithm_tag(rule.algorithm)},
              {"tree_index", rule.tree_index},
              {"leaf_id", rule.leaf_id},
              {"intervals", intervals_to_json(rule.intervals)},
              {"predicted_class", rule.predicted_class},
              {"predicted_class_name", class_names.at(static_cast<size_t>(rule.predicted_class))},
              {"support", rule.support},
              {"impurity", rule.impurity},
              {"class_counts", rule.class_counts},
              {"covered_instances", rule.covered_instances}};
}

DecisionRule rule_from_json(const Json& j) {
  DecisionRule r;
  j.at("rule_id").get_to(r.rule_id);
  j.at("model_id").get_to(r.model_id);
  r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  r.tree_index = j.value("tree_index", 0);
  r.leaf_id = j.value("leaf_id", 0);
  for (const auto& iv : j.at("intervals")) r.intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  j.at("predicted_class").get_to(r.predicted_class);
  j.at("support").get_to(r.support);
  j.at("impurity").get_to(r.impurity);
  if (j.contains("class_counts")) j.at("class_counts").get_to(r.class_counts);
  if (j.contains("covered_instances")) j.at("covered_instances").get_to(r.covered_instances);
  return r;
}

Json manual_decision_to_json(const DecisionRule& rule, const std::vector<std::string>& feature_names,
                             const std::vector<std::string>& class_names) {
  Json features = Json::array();
  for (size_t f = 0; f < rule.intervals.size(); ++f) {
    features.push_back({{"name", feature_names.at(f)}, {"min", rule.intervals[f].lo}, {"max", rule.intervals[f].hi}});
  }
  return Json{{"rule_id", rule.rule_id},
              {"model_id", rule.model_id},
              {"algorithm", algorithm_tag(rule.algorithm)},
              {"predicted_class", class_names.at(static_cast<size_t>(rule.predicted_class))},
              {"support", rule.support},
              {"impurity", rule.impurity},
              {"features", std::move(features)},
              {"tree_index", rule.tree_index},
              {"leaf_id", rule.leaf_id},
              {"class_counts", rule.class_counts},
              {"covered_instances", rule.covered_instances}};
}

DecisionRule manual_decision_from_json(const Json& j, const std::vector<std::string>& feature_names,
                                       const std::vector<std::string>& class_names) {
  DecisionRule r;
  j.at("rule_id").get_to(r.rule_id);
  j.at("model_id").get_to(r.model_id);
  r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  r.predicted_class = class_index(j.at("predicted_class").get<std::string>(), class_names);
  j.at("support").get_to(r.support);
  j.at("impurity").get_to(r.impurity);
  r.tree_index = j.value("tree_index", 0);
  r.leaf_id = j.value("leaf_id", 0);
  const auto& features = j.at("features");
  if (features.size() != feature_names.size()) {
    throw Error(ErrorKind::kInvalidArgument, "decision " + r.rule_id + " does not match the feature schema");
  }
  for (size_t f = 0; f < features.size(); ++f) {
    if (features[f].at("name").get<std::string>() != feature_names[f]) {
      throw Error(ErrorKind::kInvalidArgument, "decision " + r.rule_id + " lists features in a different order");
    }
    const double lo = features[f].at("min").get<double>();
    const double hi = features[f].at("max").get<double>();
    if (lo > hi) throw Error(ErrorKind::kInvalidArgument, "decision " + r.rule_id + " has an inverted interval");
    r.intervals.push_back({lo, hi});
  }
  if (j.contains("class_counts")) j.at("class_counts").get_to(r.class_counts);
  if (j.contains("covered_instances")) j.at("covered_instances").get_to(r.covered_instances);
  return r;
}

Json manual_decisions_document(const std::vector<DecisionRule>& rules, const std::vector<std::string>& feature_names,
                               const std::vector<std::string>& class_names) {
  Json decisions = Json::array();
  for (const auto& r : rules) decisions.push_back(manual_decision_to_json(r, feature_names, class_names));
  return Json{{"feature_names", feature_names}, {"class_names", class_names}, {"decisions", std::move(decisions)}};
}

std::vector<DecisionRule> import_manual_decisions(const Json& doc, const std::vector<std::string>& feature_names,
                                                  const std::vector<std::string>& class_names) {
  std::vector<DecisionRule> out;
  try {
    for (const auto& d : doc.at("decisions")) out.push_back(manual_decision_from_json(d, feature_names, class_names));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed manual decisions: ") + e.what());
  }
  return out;
}

Json importance_to_json(const ImportanceTable& table) {
  Json per_model = Json::object();
  for (const auto& [id, v] : table.per_model) per_model[id] = v;
  Json features = Json::array();
  for (size_t f = 0; f < table.feature_names.size(); ++f) {
    Json stats = Json::object();
    for (const auto& [tag, s] : table.per_algorithm_stats[f]) stats[tag] = s;
    features.push_back({{"index", f},
                        {"name", table.feature_names[f]},
                        {"active_mean", table.active_mean[f]},
                        {"all_mean", table.all_mean[f]},
                        {"delta", table.delta[f]},
                        {"per_algorithm", std::move(stats)}});
  }
  return Json{{"per_model", std::move(per_model)}, {"features", std::move(features)}, {"display_order", table.display_order}};
}

Json contrast_to_json(const ContrastReport& report, const std::vector<std::string>& feature_names) {
  const auto optional_interval = [](const std::optional<Interval>& iv) {
    return iv ? Json{iv->lo, iv->hi} : Json(nullptr);
  };
  Json ranked = Json::array();
  for (const auto& s : report.ranked_features) {
    ranked.push_back({{"feature", s.feature}, {"name", feature_names.at(s.feature)}, {"score", s.score}});
  }
  Json selected = Json::array();
  for (const auto& iv : report.selected_intervals) selected.push_back(optional_interval(iv));
  Json out{{"bins", report.bins},
           {"mode", compare_mode_name(report.mode)},
           {"ranked_features", std::move(ranked)},
           {"group_intervals", {{"selected", std::move(selected)}}}};
  if (!report.anchored_intervals.empty()) {
    Json anchored = Json::array();
    for (const auto& iv : report.anchored_intervals) anchored.push_back(optional_interval(iv));
    out["group_intervals"]["anchored"] = std::move(anchored);
    Json comparison = Json::array();
    for (const auto& ivs : report.comparison_intervals) comparison.push_back(intervals_to_json(ivs));
    out["comparison_intervals"] = std::move(comparison);
  } else {
    out["comparison_intervals"] = nullptr;
  }
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, "invalid JSON in '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace rulescope
