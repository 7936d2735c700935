#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulescope/serialize.hpp"
#include "rulescope/session.hpp"

// JSON payloads shared by the HTTP service and the CLI, so both emit the same
// bytes for the same session state.
namespace rulescope::api {

/// Rules filter plus the optional "limit to test instance" row.
struct RulesQuery {
  RuleFilter filter;
  std::optional<size_t> test_index;
};

Json models(const Session& session);
Json set_active(Session& session, const Json& body);
Json importance(const Session& session);

RulesQuery parse_rules_query(const Json& body, const RulesQuery& base);
/// Current session filter with its test row.
RulesQuery session_query(const Session& session);
Json rules(const Session& session, const RulesQuery& query);
Json set_filters(Session& session, const Json& body);

Json embedding(const Session& session, bool wait = false);
Json set_embedding_config(Session& session, const Json& body);

ContrastRequest parse_contrast_request(const Json& body);
Json contrast(Session& session, const Json& body);

Json agreement(const Session& session, size_t test_index);
Json conflicts(const Session& session);
Json export_decisions(Session& session, const Json& body);

/// Ranges absent from the body keep the default space for the dataset.
SearchRequest parse_search_request(const Json& body, size_t num_features);
Json search_job(const SearchJobInfo& info);
Json start_search(Session& session, const Json& body);
Json dataset_meta(const Session& session);

/// {code, message}
Json error_body(const std::string& code, const std::string& message);

/// Canonical text form of a payload.
std::string render(const Json& payload);

}  // namespace rulescope::api
