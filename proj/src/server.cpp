#include "rulescope/server.hpp"

#include <cstdlib>

#include "httplib.h"
#include "rulescope/api.hpp"
#include "rulescope/error.hpp"

namespace rulescope {

namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kParse: return 400;
    case ErrorKind::kConflict: return 409;
    default: return 500;
  }
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(api::render(body), "application/json");
}

Json request_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json body = Json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorKind::kParse, "request body must be a JSON object");
    return body;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("invalid JSON body: ") + e.what());
  }
}

// Query parameters as JSON scalars: numbers where they parse, else strings.
Json query_params(const httplib::Request& req) {
  Json out = Json::object();
  for (const auto& [key, value] : req.params) {
    if (value == "null" || value.empty()) {
      out[key] = nullptr;
      continue;
    }
    try {
      Json parsed = Json::parse(value);
      out[key] = parsed.is_number() ? parsed : Json(value);
    } catch (const Json::exception&) {
      out[key] = value;
    }
  }
  return out;
}

size_t index_param(const std::string& text) {
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorKind::kNotFound, "no such index '" + text + "'");
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, fn(req));
    } catch (const Error& e) {
      reply(res, http_status(e.kind()), api::error_body(error_code(e.kind()), e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, api::error_body("internal", e.what()));
    }
  };
}

}  // namespace

Service::Service(Session& session) : session_(session), server_(std::make_unique<httplib::Server>()) { routes(); }

Service::~Service() { stop(); }

void Service::routes() {
  auto& s = *server_;
  Session& session = session_;
  s.Get("/models", guarded([&](const httplib::Request&) { return api::models(session); }));
  s.Post("/models/active",
         guarded([&](const httplib::Request& req) { return api::set_active(session, request_body(req)); }));
  s.Get("/importance", guarded([&](const httplib::Request&) { return api::importance(session); }));
  s.Get("/rules", guarded([&](const httplib::Request& req) {
          return api::rules(session, api::parse_rules_query(query_params(req), api::session_query(session)));
        }));
  s.Post("/filters", guarded([&](const httplib::Request& req) { return api::set_filters(session, request_body(req)); }));
  s.Get("/embedding", guarded([&](const httplib::Request& req) {
          return api::embedding(session, req.has_param("wait") && req.get_param_value("wait") != "false");
        }));
  s.Post("/embedding/config",
         guarded([&](const httplib::Request& req) { return api::set_embedding_config(session, request_body(req)); }));
  s.Post("/contrast", guarded([&](const httplib::Request& req) { return api::contrast(session, request_body(req)); }));
  s.Get(R"(/agreement/([^/]+))", guarded([&](const httplib::Request& req) {
          return api::agreement(session, index_param(req.matches[1]));
        }));
  s.Get("/conflicts", guarded([&](const httplib::Request&) { return api::conflicts(session); }));
  s.Post("/export",
         guarded([&](const httplib::Request& req) { return api::export_decisions(session, request_body(req)); }));
  s.Post("/search", guarded([&](const httplib::Request& req) { return api::start_search(session, request_body(req)); }));
  s.Get(R"(/search/([^/]+))", guarded([&](const httplib::Request& req) {
          const auto id = index_param(req.matches[1]);
          const auto info = session.search_job(static_cast<int>(id));
          if (!info) throw Error(ErrorKind::kNotFound, "no search job " + std::to_string(id));
          return api::search_job(*info);
        }));
  s.Get("/dataset/meta", guarded([&](const httplib::Request&) { return api::dataset_meta(session); }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "error";
    res.set_content(api::render(api::error_body(code, "no route for " + req.method + " " + req.path)),
                    "application/json");
  });
}

int Service::bind(const std::string& host, int port) {
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void Service::serve() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

bool Service::running() const { return server_->is_running(); }

int port_from_env(int fallback) {
  const char* raw = std::getenv("RULESCOPE_PORT");
  if (raw == nullptr || *raw == '\0') return fallback;
  try {
    const int port = std::stoi(raw);
    if (port < 0 || port > 65535) throw std::out_of_range(raw);
    return port;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kInvalidArgument, std::string("invalid RULESCOPE_PORT '") + raw + "'");
  }
}

}  // namespace rulescope
