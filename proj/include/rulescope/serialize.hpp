#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "rulescope/contrast.hpp"
#include "rulescope/dataset.hpp"
#include "rulescope/ensemble.hpp"
#include "rulescope/importance.hpp"
#include "rulescope/rule_space.hpp"
#include "rulescope/rules.hpp"
#include "rulescope/search.hpp"

namespace rulescope {

using Json = nlohmann::json;

void to_json(Json& j, const Dataset& ds);
void from_json(const Json& j, Dataset& ds);

void to_json(Json& j, const HyperParams& p);
void from_json(const Json& j, HyperParams& p);

void to_json(Json& j, const ModelMetrics& m);
void from_json(const Json& j, ModelMetrics& m);

/// {"depth", "num_features", "num_classes", "nodes": [{"id", "feature",
/// "threshold", "left", "right", "class_counts", "prediction", "weight",
/// "samples", "impurity"}]}; leaves carry feature -1 and "leaf": true.
void to_json(Json& j, const DecisionTree& t);
void from_json(const Json& j, DecisionTree& t);

/// {id, algorithm, params, stage_weights, trees, metrics, active}
void to_json(Json& j, const TrainedModel& m);
void from_json(const Json& j, TrainedModel& m);

void to_json(Json& j, const SearchSpace& s);
void from_json(const Json& j, SearchSpace& s);

void to_json(Json& j, const EmbeddingConfig& c);
void from_json(const Json& j, EmbeddingConfig& c);

void to_json(Json& j, const BoxStats& s);

/// test_instance is not serialized; sessions store a test row index instead.
void to_json(Json& j, const RuleFilter& f);
void from_json(const Json& j, RuleFilter& f);

/// Full rule record used by rule listings and session files.
Json rule_to_json(const DecisionRule& rule, const std::vector<std::string>& class_names);
DecisionRule rule_from_json(const Json& j);

/// One manual-decision entry: {rule_id, model_id, algorithm, predicted_class,
/// support, impurity, features: [{name, min, max}], class_counts,
/// covered_instances}. predicted_class is the class name.
Json manual_decision_to_json(const DecisionRule& rule, const std::vector<std::string>& feature_names,
                             const std::vector<std::string>& class_names);
DecisionRule manual_decision_from_json(const Json& j, const std::vector<std::string>& feature_names,
                                       const std::vector<std::string>& class_names);

/// {"feature_names", "class_names", "decisions": [...]}
Json manual_decisions_document(const std::vector<DecisionRule>& rules, const std::vector<std::string>& feature_names,
                               const std::vector<std::string>& class_names);
std::vector<DecisionRule> import_manual_decisions(const Json& doc, const std::vector<std::string>& feature_names,
                                                  const std::vector<std::string>& class_names);

Json importance_to_json(const ImportanceTable& table);
Json contrast_to_json(const ContrastReport& report, const std::vector<std::string>& feature_names);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace rulescope
