#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rulescope/api.hpp"
#include "rulescope/error.hpp"
#include "rulescope/server.hpp"
#include "rulescope/session.hpp"

using namespace rulescope;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataArgs {
  std::string data;
  std::string target;
  std::vector<std::string> ignore;
  int bins = 0;
  uint64_t seed = 7;
  int iterations = 10;
  double train_fraction = 0.9;
  int folds = 3;
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool required) {
  auto* data = cmd->add_option("--data", args.data, "CSV file with a header row");
  auto* target = cmd->add_option("--target", args.target, "target column name");
  if (required) {
    data->required();
    target->required();
  }
  cmd->add_option("--ignore", args.ignore, "columns to drop (e.g. a country name)");
  cmd->add_option("--bins", args.bins, "equal-width bins for a numeric target (0 keeps distinct values)");
  cmd->add_option("--seed", args.seed, "seed for the split, folds and searches")->capture_default_str();
  cmd->add_option("--iterations", args.iterations, "initial models per algorithm")->capture_default_str();
  cmd->add_option("--train-fraction", args.train_fraction, "stratified training share")->capture_default_str();
  cmd->add_option("--folds", args.folds, "cross-validation folds")->capture_default_str();
}

std::unique_ptr<Session> train_session(const DataArgs& args) {
  CsvOptions csv;
  csv.target_column = args.target;
  csv.ignore_columns = args.ignore;
  Dataset ds = load_csv(args.data, csv);
  if (args.bins > 0) ds = discretize_target(ds, args.bins).dataset;
  SessionOptions options;
  options.seed = args.seed;
  options.initial_iterations = args.iterations;
  options.split.train_fraction = args.train_fraction;
  options.split.folds = args.folds;
  return Session::create(ds, options);
}

std::unique_ptr<Session> load_session(const std::string& path) { return Session::load(read_json_file(path)); }

void save_session(const Session& session, const std::string& path) { write_json_file(path, session.save()); }

void write_payload(const std::string& path, const Json& payload) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  out << api::render(payload);
}

// A JSON array of strings, or whitespace/comma-separated ids.
std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return Json::parse(text).get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "invalid id list in '" + path + "': " + e.what());
    }
  }
  std::vector<std::string> ids;
  std::string token;
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c)) != 0) {
      if (!token.empty()) ids.push_back(std::move(token));
      token.clear();
    } else {
      token += c;
    }
  }
  if (!token.empty()) ids.push_back(token);
  return ids;
}

// "7" or "5:9"
Json parse_range(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) return Json::parse(text);
    return Json::array({Json::parse(text.substr(0, colon)), Json::parse(text.substr(colon + 1))});
  } catch (const Json::exception&) {
    throw UsageError(std::string("invalid range for ") + flag + ": '" + text + "'");
  }
}

std::string fixed(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_models(const Json& payload) {
  std::printf("%-4s %-6s %8s %9s %7s %8s %6s %9s %s\n", "rank", "id", "accuracy", "precision", "recall", "overall",
              "trees", "decisions", "active");
  for (const auto& m : payload.at("models")) {
    const auto& d = m.at("display");
    std::printf("%-4d %-6s %8s %9s %7s %8s %6d %9d %s\n", m.at("rank").get<int>(), m.at("id").get<std::string>().c_str(),
                fixed(d.at("accuracy").get<double>()).c_str(), fixed(d.at("precision").get<double>()).c_str(),
                fixed(d.at("recall").get<double>()).c_str(), fixed(d.at("overall_score").get<double>()).c_str(),
                m.at("trees").get<int>(), m.at("decisions").get<int>(), m.at("active").get<bool>() ? "yes" : "no");
  }
}

void print_rules_summary(const Json& payload) {
  std::printf("rules: %zu extracted, %zu shown (%zu dimmed)\n", payload.at("total").get<size_t>(),
              payload.at("rules").size(), payload.at("dimmed").get<size_t>());
  std::printf("per class:\n");
  for (const auto& [name, count] : payload.at("per_class").items()) {
    std::printf("  %-16s %zu\n", name.c_str(), count.get<size_t>());
  }
  std::printf("support histogram (all rules):\n");
  const auto& edges = payload.at("support_histogram").at("edges");
  const auto& counts = payload.at("support_histogram").at("counts");
  for (size_t b = 0; b < counts.size(); ++b) {
    if (counts[b].get<size_t>() == 0) continue;
    std::printf("  [%4zu, %4zu) %zu\n", edges[b].get<size_t>(), edges[b + 1].get<size_t>(), counts[b].get<size_t>());
  }
}

void print_contrast(const Json& payload) {
  std::printf("bins: %d  mode: %s\n", payload.at("bins").get<int>(), payload.at("mode").get<std::string>().c_str());
  const auto& selected = payload.at("group_intervals").at("selected");
  const bool compare = !payload.at("comparison_intervals").is_null();
  for (const auto& f : payload.at("ranked_features")) {
    const size_t idx = f.at("feature").get<size_t>();
    std::printf("  %-32s %10.6f", f.at("name").get<std::string>().c_str(), f.at("score").get<double>());
    const auto& iv = selected.at(idx);
    if (iv.is_null()) {
      std::printf("  selected: empty");
    } else {
      std::printf("  selected: [%.4f, %.4f]", iv.at(0).get<double>(), iv.at(1).get<double>());
    }
    if (compare) {
      std::printf("  %s:", payload.at("mode").get<std::string>().c_str());
      const auto& pieces = payload.at("comparison_intervals").at(idx);
      if (pieces.empty()) std::printf(" empty");
      for (const auto& p : pieces) std::printf(" [%.4f, %.4f]", p.at(0).get<double>(), p.at(1).get<double>());
    }
    std::printf("\n");
  }
}

void print_agreement(const Json& row) {
  const auto votes = [](const Json& v) {
    std::string out;
    for (const auto& [name, count] : v.items()) {
      if (count.get<size_t>() == 0) continue;
      if (!out.empty()) out += ", ";
      out += name + ":" + std::to_string(count.get<size_t>());
    }
    return out.empty() ? std::string("-") : out;
  };
  std::printf("test %zu  GT=%s  MD{%s}  RF{%s}  AB{%s}  %s\n", row.at("test_index").get<size_t>(),
              row.at("ground_truth").get<std::string>().c_str(), votes(row.at("md_votes")).c_str(),
              votes(row.at("rf_votes")).c_str(), votes(row.at("ab_votes")).c_str(),
              row.at("conflict").get<bool>() ? "CONFLICT" : "ok");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rulescope: train tree ensembles and explore their decision rules"};
  app.require_subcommand(1);

  DataArgs train_args;
  std::string train_session_path = "rulescope-session.json";
  std::string train_out;
  auto* train = app.add_subcommand("train", "train the initial 10 RF + 10 AB pool and print the overview");
  add_data_options(train, train_args, true);
  train->add_option("--session", train_session_path, "where to write the session document")->capture_default_str();
  train->add_option("--out", train_out, "write the models payload (as GET /models) here");

  std::string session_path;
  std::string out_path;
  const auto session_option = [&](CLI::App* cmd) {
    cmd->add_option("--session", session_path, "session document written by train")->required();
    cmd->add_option("--out", out_path, "write the JSON payload here");
  };

  std::vector<std::string> rule_models;
  size_t min_support = 0;
  std::optional<size_t> max_support;
  double max_impurity = 1.0;
  std::optional<size_t> test_instance;
  int decimals = 15;
  auto* rules = app.add_subcommand("rules", "extract and filter the rules of chosen models");
  session_option(rules);
  rules->add_option("--models", rule_models, "model ids to activate (default: the session's active set)");
  rules->add_option("--min-support", min_support, "hide rules covering fewer training rows");
  rules->add_option("--max-support", max_support, "hide rules covering more training rows");
  rules->add_option("--max-impurity", max_impurity, "dim rules above this Gini impurity");
  rules->add_option("--test-instance", test_instance, "keep only rules matching this test row");
  rules->add_option("--decimals", decimals, "rounding decimals for interval bounds")->check(CLI::Range(0, 15));

  EmbeddingConfig embed_config;
  std::optional<int> n_neighbors;
  bool no_tune = false;
  auto* embed = app.add_subcommand("embed", "lay out the rules of the active models in 2-D");
  session_option(embed);
  embed->add_option("--n-neighbors", n_neighbors, "fixed neighbourhood size (disables tuning)");
  embed->add_option("--min-dist", embed_config.min_dist, "minimum distance in the layout");
  embed->add_option("--embedding-seed", embed_config.seed, "layout seed");
  embed->add_option("--dbscan-eps", embed_config.dbscan_eps, "DBSCAN radius (0 estimates it)");
  embed->add_option("--dbscan-min-pts", embed_config.dbscan_min_pts, "DBSCAN core size");
  embed->add_option("--n-epochs", embed_config.n_epochs, "optimisation epochs (0 picks by size)");
  embed->add_flag("--no-tune", no_tune, "keep n_neighbors instead of tuning it from the cluster count");

  std::string selected_file;
  std::string anchored_file;
  std::string universe_file;
  int contrast_bins = 10;
  std::string mode = "overlap";
  auto* contrast = app.add_subcommand("contrast", "rank features separating a selection from the other rules");
  session_option(contrast);
  contrast->add_option("--selected", selected_file, "file of selected rule ids")->required();
  contrast->add_option("--anchored", anchored_file, "file of anchored rule ids for comparison mode");
  contrast->add_option("--universe", universe_file, "file of rule ids to compare against (default: all)");
  contrast->add_option("--bins", contrast_bins, "histogram bins per feature")->capture_default_str();
  contrast->add_option("--mode", mode, "overlap or difference")->check(CLI::IsMember({"overlap", "difference"}));

  std::optional<size_t> agreement_index;
  bool only_conflicts = false;
  auto* agreement = app.add_subcommand("agreement", "votes of manual decisions and active models per test row");
  session_option(agreement);
  agreement->add_option("--test-instance", agreement_index, "a single test row");
  agreement->add_flag("--conflicts", only_conflicts, "list the conflicted test rows");

  std::string export_ids;
  std::vector<std::string> export_list;
  auto* exporter = app.add_subcommand("export", "export rules as manual decisions");
  session_option(exporter);
  exporter->add_option("--rules", export_ids, "file of rule ids");
  exporter->add_option("--rule-ids", export_list, "rule ids");

  std::string algorithm;
  int search_iterations = 10;
  uint64_t search_seed = 0;
  std::map<std::string, std::string> ranges;
  auto* search = app.add_subcommand("search", "train more models in a constrained space (added inactive)");
  session_option(search);
  search->add_option("--algorithm", algorithm, "RF or AB")->required()->check(CLI::IsMember({"RF", "AB", "rf", "ab"}));
  search->add_option("--iterations", search_iterations, "candidates to train")->capture_default_str();
  search->add_option("--seed", search_seed, "sampling seed")->capture_default_str();
  for (const char* key : {"n_estimators", "max_depth", "min_samples_leaf", "max_features", "learning_rate"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    search->add_option_function<std::string>(
        flag, [&ranges, key](const std::string& v) { ranges[key] = v; }, "value or lo:hi");
  }

  DataArgs serve_args;
  std::string serve_session;
  std::string host = "127.0.0.1";
  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "start the HTTP JSON service");
  add_data_options(serve, serve_args, false);
  serve->add_option("--session", serve_session, "resume a saved session instead of training");
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--port", port, "port (default: RULESCOPE_PORT or 8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) {
      auto session = train_session(train_args);
      save_session(*session, train_session_path);
      const Json payload = api::models(*session);
      write_payload(train_out, payload);
      print_models(payload);
    } else if (rules->parsed()) {
      auto session = load_session(session_path);
      if (!rule_models.empty()) session->set_active(rule_models);
      api::RulesQuery query = api::session_query(*session);
      query.filter.min_support = min_support;
      if (max_support) query.filter.max_support = *max_support;
      query.filter.max_impurity = max_impurity;
      query.filter.rounding_decimals = decimals;
      if (test_instance) query.test_index = test_instance;
      const Json payload = api::rules(*session, query);
      write_payload(out_path, payload);
      print_rules_summary(payload);
    } else if (embed->parsed()) {
      auto session = load_session(session_path);
      Json body = embed_config;
      if (n_neighbors) body["n_neighbors"] = *n_neighbors;
      body["tune_neighbors"] = !no_tune && !n_neighbors;
      api::set_embedding_config(*session, body);
      const Json payload = api::embedding(*session, true);
      write_payload(out_path, payload);
      std::printf("points: %zu  clusters: %d  n_neighbors: %d  eps: %.6f\n", payload.at("points").size(),
                  payload.at("n_clusters").get<int>(), payload.at("n_neighbors").get<int>(),
                  payload.at("eps").get<double>());
    } else if (contrast->parsed()) {
      auto session = load_session(session_path);
      Json body{{"selected", read_id_list(selected_file)}, {"bins", contrast_bins}, {"mode", mode}};
      if (!anchored_file.empty()) body["anchored"] = read_id_list(anchored_file);
      if (!universe_file.empty()) body["universe"] = read_id_list(universe_file);
      const Json payload = api::contrast(*session, body);
      write_payload(out_path, payload);
      print_contrast(payload);
    } else if (agreement->parsed()) {
      if (agreement_index.has_value() == only_conflicts) {
        throw UsageError("agreement needs exactly one of --test-instance or --conflicts");
      }
      auto session = load_session(session_path);
      if (agreement_index) {
        const Json payload = api::agreement(*session, *agreement_index);
        write_payload(out_path, payload);
        print_agreement(payload);
      } else {
        const Json payload = api::conflicts(*session);
        write_payload(out_path, payload);
        for (const auto& i : payload.at("conflicts")) print_agreement(api::agreement(*session, i.get<size_t>()));
        std::printf("%zu conflicted of %zu test rows\n", payload.at("count").get<size_t>(),
                    payload.at("test_size").get<size_t>());
      }
    } else if (exporter->parsed()) {
      std::vector<std::string> ids = export_list;
      if (!export_ids.empty()) {
        const auto more = read_id_list(export_ids);
        ids.insert(ids.end(), more.begin(), more.end());
      }
      if (ids.empty()) throw UsageError("export needs --rules or --rule-ids");
      auto session = load_session(session_path);
      const Json payload = api::export_decisions(*session, Json{{"rule_ids", ids}});
      save_session(*session, session_path);
      write_payload(out_path, payload);
      std::printf("exported %zu decisions (%zu in session)\n", payload.at("decisions").size(),
                  session->manual_decisions().size());
    } else if (search->parsed()) {
      auto session = load_session(session_path);
      Json space = Json::object();
      for (const auto& [key, text] : ranges) {
        std::string flag = "--" + key;
        space[key] = parse_range(text, flag.c_str());
      }
      Json body{{"algorithm", algorithm}, {"iterations", search_iterations}, {"seed", search_seed}, {"space", space}};
      const SearchRequest req = api::parse_search_request(body, session->train().cols());
      SearchJobInfo info = session->run_search_now(req);
      save_session(*session, session_path);
      const Json payload = api::search_job(info);
      write_payload(out_path, payload);
      for (const auto& m : session->models()) {
        if (std::find(info.model_ids.begin(), info.model_ids.end(), m.id) == info.model_ids.end()) continue;
        std::printf("%-6s overall %s%%\n", m.id.c_str(), fixed(m.metrics.overall_score * 100.0).c_str());
      }
      for (const auto& f : info.failures) std::printf("candidate %zu failed: %s\n", f.candidate, f.message.c_str());
    } else if (serve->parsed()) {
      std::unique_ptr<Session> session;
      if (!serve_session.empty()) {
        session = load_session(serve_session);
      } else {
        if (serve_args.data.empty() || serve_args.target.empty()) {
          throw UsageError("serve needs --session or both --data and --target");
        }
        session = train_session(serve_args);
      }
      Service service(*session);
      const int bound = service.bind(host, port ? *port : port_from_env());
      std::printf("listening on http://%s:%d\n", host.c_str(), bound);
      std::fflush(stdout);
      service.serve();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error (" << error_code(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
