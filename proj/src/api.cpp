#include "rulescope/api.hpp"

#include <algorithm>
#include <cmath>

#include "rulescope/error.hpp"
#include "rulescope/evaluation.hpp"

namespace rulescope::api {

namespace {

constexpr int kSupportHistogramBins = 20;

double percent(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

template <typename Fn>
auto parsing(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed ") + what + ": " + e.what());
  }
}

std::vector<std::string> string_list(const Json& body, const char* key) {
  if (!body.contains(key)) throw Error(ErrorKind::kInvalidArgument, std::string("missing '") + key + "'");
  return body.at(key).get<std::vector<std::string>>();
}

Json labelled_votes(const std::vector<size_t>& votes, const std::vector<std::string>& class_names) {
  Json out = Json::object();
  for (size_t c = 0; c < votes.size(); ++c) out[class_names[c]] = votes[c];
  return out;
}

}  // namespace

Json error_body(const std::string& code, const std::string& message) {
  return Json{{"code", code}, {"message", message}};
}

std::string render(const Json& payload) { return payload.dump(2) + "\n"; }

Json models(const Session& session) {
  const auto pool = session.models();
  const auto ordered = sorted_view(pool);
  Json list = Json::array();
  for (size_t rank = 0; rank < ordered.size(); ++rank) {
    const auto& m = *ordered[rank];
    list.push_back({{"id", m.id},
                    {"rank", rank},
                    {"algorithm", algorithm_tag(m.algorithm)},
                    {"params", m.params},
                    {"metrics", m.metrics},
                    {"display",
                     {{"accuracy", percent(m.metrics.accuracy)},
                      {"precision", percent(m.metrics.precision_macro)},
                      {"recall", percent(m.metrics.recall_macro)},
                      {"overall_score", percent(m.metrics.overall_score)}}},
                    {"trees", m.trees.size()},
                    {"decisions", m.decision_count()},
                    {"active", m.active}});
  }
  Json transitions = Json::array();
  for (const auto& t : confusion_transitions(ordered)) {
    transitions.push_back({{"from", t.from_model},
                           {"to", t.to_model},
                           {"delta_fp", t.per_class_delta_fp},
                           {"delta_fn", t.per_class_delta_fn}});
  }
  return Json{{"models", std::move(list)},
              {"transitions", std::move(transitions)},
              {"class_names", session.train().class_names},
              {"fingerprint", std::to_string(session.fingerprint())}};
}

Json set_active(Session& session, const Json& body) {
  const auto ids = parsing("activation request", [&] { return string_list(body, "ids"); });
  const bool changed = session.set_active(ids);
  return Json{{"changed", changed},
              {"active_ids", session.active_ids()},
              {"fingerprint", std::to_string(session.fingerprint())}};
}

Json importance(const Session& session) {
  Json out = importance_to_json(session.importance());
  out["active_ids"] = session.active_ids();
  return out;
}

RulesQuery session_query(const Session& session) { return {session.filter(), session.current_test_index()}; }

RulesQuery parse_rules_query(const Json& body, const RulesQuery& base) {
  return parsing("rules filter", [&] {
    RulesQuery q = base;
    from_json(body, q.filter);
    if (body.contains("test_index")) {
      q.test_index = body.at("test_index").is_null() ? std::nullopt : std::optional<size_t>(body.at("test_index").get<size_t>());
    }
    return q;
  });
}

Json rules(const Session& session, const RulesQuery& query) {
  const RuleFilter filter = session.resolve_filter(query.filter, query.test_index);
  const auto all = session.rules();
  const auto train = session.train();
  const FilterResult result = apply_filter(all, filter);

  std::map<std::string, const char*> state;
  for (const auto& id : result.visible) state[id] = "visible";
  for (const auto& id : result.dimmed) state[id] = "dimmed";

  Json list = Json::array();
  std::vector<size_t> per_class(train.num_classes(), 0);
  for (const auto& rule : all) {
    const auto it = state.find(rule.rule_id);
    if (it == state.end()) continue;
    Json j = rule_to_json(rule, train.class_names);
    j["state"] = it->second;
    Json rounded = Json::array();
    for (const auto& iv : round_rule(rule, filter.rounding_decimals).intervals) rounded.push_back({iv.lo, iv.hi});
    j["rounded_intervals"] = std::move(rounded);
    per_class[static_cast<size_t>(rule.predicted_class)] += 1;
    list.push_back(std::move(j));
  }

  // Histogram over every extracted rule so a brush can widen the range again.
  size_t max_support = 0;
  for (const auto& r : all) max_support = std::max(max_support, r.support);
  const size_t width = std::max<size_t>(1, (max_support + kSupportHistogramBins) / kSupportHistogramBins);
  std::vector<size_t> counts(kSupportHistogramBins, 0);
  for (const auto& r : all) counts[std::min<size_t>(r.support / width, kSupportHistogramBins - 1)] += 1;
  std::vector<size_t> edges;
  for (size_t b = 0; b <= kSupportHistogramBins; ++b) edges.push_back(b * width);

  Json filter_json = filter;
  filter_json["test_index"] = query.test_index ? Json(*query.test_index) : Json(nullptr);
  return Json{{"filter", std::move(filter_json)},
              {"feature_names", train.feature_names},
              {"class_names", train.class_names},
              {"total", all.size()},
              {"visible", result.visible.size()},
              {"dimmed", result.dimmed.size()},
              {"per_class", labelled_votes(per_class, train.class_names)},
              {"support_histogram", {{"edges", edges}, {"counts", counts}}},
              {"rules", std::move(list)}};
}

Json set_filters(Session& session, const Json& body) {
  const RulesQuery q = parse_rules_query(body, session_query(session));
  session.set_filter(q.filter, q.test_index);
  Json out = session.filter();
  out["test_index"] = q.test_index ? Json(*q.test_index) : Json(nullptr);
  out["fingerprint"] = std::to_string(session.fingerprint());
  return out;
}

Json embedding(const Session& session, bool wait) {
  const EmbeddingSnapshot snap = wait ? session.wait_for_embedding() : session.embedding();
  const auto rules = session.rules();
  const auto class_names = session.train().class_names;
  std::map<std::string, const DecisionRule*> by_id;
  for (const auto& r : rules) by_id[r.rule_id] = &r;

  Json points = Json::array();
  for (const auto& p : snap.result.points) {
    Json j{{"rule_id", p.rule_id}, {"x", p.x}, {"y", p.y}, {"cluster", p.cluster_label}};
    const auto it = by_id.find(p.rule_id);
    if (it != by_id.end()) {
      const DecisionRule& r = *it->second;
      j["model_id"] = r.model_id;
      j["algorithm"] = algorithm_tag(r.algorithm);
      j["predicted_class"] = class_names.at(static_cast<size_t>(r.predicted_class));
      j["support"] = r.support;
      j["impurity"] = r.impurity;
    }
    points.push_back(std::move(j));
  }
  return Json{{"ready", snap.ready},
              {"stale", snap.stale},
              {"generation", snap.generation},
              {"config", snap.config},
              {"tune_neighbors", snap.tuned},
              {"n_neighbors", snap.result.n_neighbors},
              {"n_clusters", snap.result.n_clusters},
              {"eps", snap.result.eps},
              {"points", std::move(points)}};
}

Json set_embedding_config(Session& session, const Json& body) {
  EmbeddingSnapshot current = session.embedding();
  EmbeddingConfig config = current.config;
  bool tune = current.tuned;
  parsing("embedding config", [&] {
    from_json(body, config);
    tune = body.value("tune_neighbors", body.contains("n_neighbors") ? false : tune);
    return 0;
  });
  session.set_embedding_config(config, tune);
  return Json{{"config", config}, {"tune_neighbors", tune}, {"fingerprint", std::to_string(session.fingerprint())}};
}

ContrastRequest parse_contrast_request(const Json& body) {
  return parsing("contrast request", [&] {
    ContrastRequest req;
    req.selected = string_list(body, "selected");
    if (body.contains("universe")) req.universe = body.at("universe").get<std::vector<std::string>>();
    req.bins = body.value("bins", req.bins);
    if (body.contains("mode")) req.mode = parse_compare_mode(body.at("mode").get<std::string>());
    if (body.contains("anchored") && !body.at("anchored").is_null()) {
      req.anchored = body.at("anchored").get<std::vector<std::string>>();
    }
    return req;
  });
}

Json contrast(Session& session, const Json& body) {
  const ContrastRequest req = parse_contrast_request(body);
  const ContrastReport report = session.contrast(req);
  Json out = contrast_to_json(report, session.train().feature_names);
  out["selected"] = req.selected;
  out["anchored"] = req.anchored ? Json(*req.anchored) : Json(nullptr);
  return out;
}

Json agreement(const Session& session, size_t test_index) {
  const AgreementRow row = session.agreement(test_index);
  const auto test = session.test();
  const auto& names = test.class_names;
  const auto values = test.row(test_index);
  return Json{{"test_index", row.test_index},
              {"instance", std::vector<double>(values.begin(), values.end())},
              {"md_votes", labelled_votes(row.md_votes, names)},
              {"rf_votes", labelled_votes(row.rf_votes, names)},
              {"ab_votes", labelled_votes(row.ab_votes, names)},
              {"ground_truth", names.at(static_cast<size_t>(row.ground_truth))},
              {"majority", row.majority >= 0 ? Json(names.at(static_cast<size_t>(row.majority))) : Json(nullptr)},
              {"unanimous", row.unanimous},
              {"conflict", row.conflict}};
}

Json conflicts(const Session& session) {
  const auto list = session.list_conflicts();
  return Json{{"conflicts", list}, {"count", list.size()}, {"test_size", session.test().rows()}};
}

Json export_decisions(Session& session, const Json& body) {
  const auto ids = parsing("export request", [&] { return string_list(body, "rule_ids"); });
  return session.export_manual_decisions(ids);
}

SearchRequest parse_search_request(const Json& body, size_t num_features) {
  return parsing("search request", [&] {
    SearchRequest req;
    if (!body.contains("algorithm")) throw Error(ErrorKind::kInvalidArgument, "missing 'algorithm'");
    req.algorithm = parse_algorithm(body.at("algorithm").get<std::string>());
    req.iterations = body.value("iterations", req.iterations);
    req.seed = body.value("seed", req.seed);
    req.space = default_space(num_features);
    if (body.contains("space")) from_json(body.at("space"), req.space);
    req.space.validate();
    return req;
  });
}

Json search_job(const SearchJobInfo& info) {
  Json failures = Json::array();
  for (const auto& f : info.failures) failures.push_back({{"candidate", f.candidate}, {"message", f.message}});
  return Json{{"job", info.id},
              {"status", job_status_name(info.status)},
              {"progress", info.progress},
              {"total", info.total},
              {"model_ids", info.model_ids},
              {"failures", std::move(failures)},
              {"message", info.message}};
}

Json start_search(Session& session, const Json& body) {
  const SearchRequest req = parse_search_request(body, session.train().cols());
  const int id = session.start_search(req);
  return search_job(*session.search_job(id));
}

Json dataset_meta(const Session& session) {
  const auto train = session.train();
  const auto test = session.test();
  Json bounds = Json::array();
  for (const auto& b : train.bounds) bounds.push_back({b.min, b.max});
  const auto rows = [](const Dataset& ds) {
    Json out = Json::array();
    for (size_t i = 0; i < ds.rows(); ++i) {
      const auto r = ds.row(i);
      out.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return out;
  };
  const auto normalized = [&](const Dataset& ds) {
    Json out = Json::array();
    for (size_t i = 0; i < ds.rows(); ++i) {
      std::vector<double> v;
      for (size_t f = 0; f < ds.cols(); ++f) {
        const double range = train.bounds[f].max - train.bounds[f].min;
        v.push_back(range > 0.0 ? (ds.at(i, f) - train.bounds[f].min) / range : 0.5);
      }
      out.push_back(std::move(v));
    }
    return out;
  };
  return Json{{"feature_names", train.feature_names},
              {"class_names", train.class_names},
              {"bounds", std::move(bounds)},
              {"train_size", train.rows()},
              {"test_size", test.rows()},
              {"train_class_counts", train.class_counts()},
              {"test_class_counts", test.class_counts()},
              {"train", {{"values", rows(train)}, {"normalized", normalized(train)}, {"labels", train.labels}}},
              {"test", {{"values", rows(test)}, {"normalized", normalized(test)}, {"labels", test.labels}}},
              {"current_test_index",
               session.current_test_index() ? Json(*session.current_test_index()) : Json(nullptr)},
              {"fingerprint", std::to_string(session.fingerprint())}};
}

}  // namespace rulescope::api
