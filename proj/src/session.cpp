#include "rulescope/session.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "rulescope/error.hpp"
#include "rulescope/evaluation.hpp"

namespace rulescope {

namespace {

constexpr int kSessionVersion = 1;

uint64_t fnv1a(std::string_view text, uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Numeric suffix of an id such as "RF12", or -1.
int id_number(const std::string& id) {
  size_t pos = id.size();
  while (pos > 0 && std::isdigit(static_cast<unsigned char>(id[pos - 1])) != 0) --pos;
  if (pos == id.size()) return -1;
  int value = 0;
  std::from_chars(id.data() + pos, id.data() + id.size(), value);
  return value;
}

std::vector<std::string> active_of(const std::vector<TrainedModel>& models) {
  std::vector<std::string> out;
  for (const auto& m : models) {
    if (m.active) out.push_back(m.id);
  }
  return out;
}

}  // namespace

const char* job_status_name(JobStatus s) {
  switch (s) {
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
    case JobStatus::kCancelled: return "cancelled";
  }
  return "unknown";
}

Verdict judge(const std::vector<size_t>& pooled_votes, int ground_truth) {
  Verdict v;
  size_t total = 0;
  size_t nonzero = 0;
  for (size_t c = 0; c < pooled_votes.size(); ++c) {
    total += pooled_votes[c];
    nonzero += pooled_votes[c] > 0 ? 1 : 0;
    if (pooled_votes[c] > pooled_votes[static_cast<size_t>(v.majority)]) v.majority = static_cast<int>(c);
  }
  if (total == 0) {
    v.majority = -1;
    return v;
  }
  v.unanimous = nonzero == 1;
  v.conflict = !v.unanimous || v.majority != ground_truth;
  return v;
}

struct Session::Job {
  SearchJobInfo info;
  std::atomic<int> progress{0};
  std::jthread thread;
};

std::unique_ptr<Session> Session::create(const Dataset& full, const SessionOptions& options) {
  SessionOptions opts = options;
  opts.split.seed = options.seed;
  TrainTestSplit split = stratified_split(full, opts.split);
  const auto folds = make_folds(split.train, opts.split);

  std::vector<TrainedModel> models;
  for (const Algorithm alg : {Algorithm::kRandomForest, Algorithm::kAdaBoost}) {
    SearchRequest req;
    req.algorithm = alg;
    req.iterations = opts.initial_iterations;
    req.space = default_space(split.train.cols());
    req.seed = opts.seed * 2 + (alg == Algorithm::kRandomForest ? 0 : 1);
    SearchOptions so;
    so.workers = opts.workers;
    auto result = run_search(req, split.train, folds, so);
    for (auto& m : result.models) {
      m.active = true;
      models.push_back(std::move(m));
    }
  }
  return std::make_unique<Session>(std::move(split), std::move(models), opts);
}

std::unique_ptr<Session> Session::load(const Json& doc, const SessionOptions& options) {
  try {
    if (doc.value("version", 0) != kSessionVersion) throw Error(ErrorKind::kParse, "unsupported session version");
    SessionOptions opts = options;
    const auto& so = doc.at("options");
    opts.split.train_fraction = so.at("train_fraction").get<double>();
    opts.split.folds = so.at("folds").get<int>();
    opts.seed = so.at("seed").get<uint64_t>();
    opts.split.seed = opts.seed;
    opts.embedding = doc.at("embedding_config").get<EmbeddingConfig>();
    opts.tune_neighbors = doc.value("tune_neighbors", true);

    TrainTestSplit split;
    split.train = doc.at("train").get<Dataset>();
    split.test = doc.at("test").get<Dataset>();
    split.train_indices = doc.value("train_indices", std::vector<size_t>{});
    split.test_indices = doc.value("test_indices", std::vector<size_t>{});
    auto models = doc.at("models").get<std::vector<TrainedModel>>();

    auto session = std::make_unique<Session>(std::move(split), std::move(models), opts);
    if (doc.contains("manual_decisions")) session->import_manual_decisions(doc.at("manual_decisions"));
    std::optional<size_t> test_index;
    if (doc.contains("test_index") && !doc.at("test_index").is_null()) test_index = doc.at("test_index").get<size_t>();
    session->set_filter(doc.value("filter", Json::object()).get<RuleFilter>(), test_index);
    if (doc.contains("next_id")) {
      std::unique_lock lock(session->mutex_);
      for (const auto& [tag, value] : doc.at("next_id").items()) {
        auto& next = session->next_id_[tag];
        next = std::max(next, value.get<int>());
      }
    }
    return session;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed session: ") + e.what());
  }
}

Session::Session(TrainTestSplit split, std::vector<TrainedModel> models, const SessionOptions& options)
    : options_(options), split_(std::move(split)), models_(std::move(models)) {
  split_.train.validate();
  split_.test.validate();
  if (split_.train.feature_names != split_.test.feature_names) {
    throw Error(ErrorKind::kInvalidArgument, "train and test schemas differ");
  }
  SplitSpec spec = options_.split;
  spec.seed = options_.seed;
  folds_ = make_folds(split_.train, spec);

  std::set<std::string> seen;
  for (const auto& m : models_) {
    if (!seen.insert(m.id).second) throw Error(ErrorKind::kConflict, "duplicate model id " + m.id);
    for (const auto& t : m.trees) {
      if (t.num_features != split_.train.cols() ||
          t.num_classes != split_.train.num_classes()) {
        throw Error(ErrorKind::kInvalidArgument, "model " + m.id + " does not match the dataset schema");
      }
    }
    auto& next = next_id_[algorithm_tag(m.algorithm)];
    next = std::max(next, id_number(m.id) + 1);
  }
  for (const char* tag : {"RF", "AB"}) {
    auto& next = next_id_[tag];
    next = std::max(next, 1);
  }

  embedding_config_ = options_.embedding;
  tune_neighbors_ = options_.tune_neighbors;
  {
    std::unique_lock lock(mutex_);
    rebuild_locked();
  }
  embedding_thread_ = std::jthread([this](std::stop_token stop) { embedding_worker(stop); });
}

Session::~Session() {
  {
    std::unique_lock lock(mutex_);
    embedding_cancel_.request_stop();
    for (auto& [id, job] : jobs_) job->thread.request_stop();
  }
  embedding_thread_.request_stop();
  embedding_cv_.notify_all();
  if (embedding_thread_.joinable()) embedding_thread_.join();
  std::map<int, std::shared_ptr<Job>> jobs;
  {
    std::unique_lock lock(mutex_);
    jobs = jobs_;
  }
  for (auto& [id, job] : jobs) {
    if (job->thread.joinable()) job->thread.join();
  }
}

Json Session::save() const {
  std::shared_lock lock(mutex_);
  Json next = Json::object();
  for (const auto& [tag, value] : next_id_) next[tag] = value;
  return Json{{"version", kSessionVersion},
              {"options",
               {{"train_fraction", options_.split.train_fraction},
                {"folds", options_.split.folds},
                {"seed", options_.seed}}},
              {"train", split_.train},
              {"test", split_.test},
              {"train_indices", split_.train_indices},
              {"test_indices", split_.test_indices},
              {"models", models_},
              {"manual_decisions",
               manual_decisions_document(manual_decisions_, split_.train.feature_names, split_.train.class_names)},
              {"filter", filter_},
              {"test_index", current_test_index_ ? Json(*current_test_index_) : Json(nullptr)},
              {"embedding_config", embedding_config_},
              {"tune_neighbors", tune_neighbors_},
              {"next_id", next}};
}

Dataset Session::train() const {
  std::shared_lock lock(mutex_);
  return split_.train;
}

Dataset Session::test() const {
  std::shared_lock lock(mutex_);
  return split_.test;
}

std::vector<TrainedModel> Session::models() const {
  std::shared_lock lock(mutex_);
  return models_;
}

std::vector<std::string> Session::active_ids() const {
  std::shared_lock lock(mutex_);
  return active_of(models_);
}

std::vector<DecisionRule> Session::rules() const {
  std::shared_lock lock(mutex_);
  return rules_;
}

std::vector<DecisionRule> Session::manual_decisions() const {
  std::shared_lock lock(mutex_);
  return manual_decisions_;
}

ImportanceTable Session::importance() const {
  std::shared_lock lock(mutex_);
  return importance_;
}

RuleFilter Session::filter() const {
  std::shared_lock lock(mutex_);
  return filter_;
}

std::optional<size_t> Session::current_test_index() const {
  std::shared_lock lock(mutex_);
  return current_test_index_;
}

std::map<std::string, std::vector<std::string>> Session::selections() const {
  std::shared_lock lock(mutex_);
  return selections_;
}

uint64_t Session::fingerprint() const {
  std::shared_lock lock(mutex_);
  return fingerprint_locked();
}

uint64_t Session::fingerprint_locked() const {
  uint64_t h = fnv1a("session");
  for (const auto& m : models_) {
    h = fnv1a(m.id, h);
    h = fnv1a(m.active ? "+" : "-", h);
  }
  h = fnv1a(Json(filter_).dump(), h);
  h = fnv1a(current_test_index_ ? std::to_string(*current_test_index_) : "none", h);
  h = fnv1a(Json(embedding_config_).dump(), h);
  h = fnv1a(tune_neighbors_ ? "tuned" : "fixed", h);
  for (const auto& r : manual_decisions_) h = fnv1a(r.rule_id, h);
  return h;
}

void Session::rebuild_locked() {
  rules_.clear();
  rule_index_.clear();
  for (const auto& m : models_) {
    if (!m.active) continue;
    for (auto& rule : extract_rules(m, split_.train)) rules_.push_back(std::move(rule));
  }
  for (size_t i = 0; i < rules_.size(); ++i) rule_index_[rules_[i].rule_id] = i;
  const auto active = active_of(models_);
  if (active.empty()) {
    importance_ = ImportanceTable{};
    importance_.feature_names = split_.train.feature_names;
  } else {
    importance_ = aggregate(models_, active, split_.train.feature_names);
  }
  schedule_embedding_locked();
}

void Session::schedule_embedding_locked() {
  ++embedding_generation_;
  embedding_cancel_.request_stop();
  embedding_cancel_ = std::stop_source();
  embedding_cv_.notify_all();
}

void Session::embedding_worker(std::stop_token stop) {
  std::unique_lock lock(mutex_);
  while (!stop.stop_requested()) {
    embedding_cv_.wait(lock, stop, [&] { return embedding_generation_ != embedding_.generation; });
    if (stop.stop_requested()) return;

    const uint64_t generation = embedding_generation_;
    const auto vectors = vectorize(rules_, split_.train.bounds);
    const EmbeddingConfig config = embedding_config_;
    const bool tune = tune_neighbors_;
    const std::stop_token cancel = embedding_cancel_.get_token();
    lock.unlock();

    EmbeddingResult result;
    bool ok = true;
    try {
      result = embed(vectors, config, tune, cancel);
      ok = !cancel.stop_requested() || result.points.size() == vectors.size();
    } catch (const std::exception&) {
      ok = false;
    }

    lock.lock();
    if (generation != embedding_generation_) continue;
    if (!ok) {
      // Publish an empty layout rather than spinning on bad input.
      result = EmbeddingResult{};
    }
    embedding_.generation = generation;
    embedding_.ready = true;
    embedding_.stale = false;
    embedding_.config = config;
    embedding_.tuned = tune;
    embedding_.result = std::move(result);
    embedding_cv_.notify_all();
  }
}

bool Session::set_active(const std::vector<std::string>& ids) {
  std::unique_lock lock(mutex_);
  if (ids.empty()) throw Error(ErrorKind::kInvalidArgument, "active set must not be empty");
  std::set<std::string> wanted(ids.begin(), ids.end());
  for (const auto& id : wanted) {
    const bool known = std::any_of(models_.begin(), models_.end(), [&](const TrainedModel& m) { return m.id == id; });
    if (!known) throw Error(ErrorKind::kNotFound, "unknown model " + id);
  }
  const auto current = active_of(models_);
  if (std::set<std::string>(current.begin(), current.end()) == wanted) return false;
  for (auto& m : models_) m.active = wanted.count(m.id) > 0;
  rebuild_locked();
  return true;
}

RuleFilter Session::resolve_filter(RuleFilter filter, std::optional<size_t> test_index) const {
  std::shared_lock lock(mutex_);
  if (filter.min_support > filter.max_support) {
    throw Error(ErrorKind::kInvalidArgument, "min_support exceeds max_support");
  }
  if (filter.rounding_decimals < 0 || filter.rounding_decimals > 15) {
    throw Error(ErrorKind::kInvalidArgument, "rounding decimals must be within [0, 15]");
  }
  if (test_index) {
    if (*test_index >= split_.test.rows()) throw Error(ErrorKind::kNotFound, "test instance out of range");
    const auto row = split_.test.row(*test_index);
    filter.test_instance = std::vector<double>(row.begin(), row.end());
  }
  return filter;
}

void Session::set_filter(const RuleFilter& filter, std::optional<size_t> test_index) {
  RuleFilter resolved = resolve_filter(filter, test_index);
  std::unique_lock lock(mutex_);
  resolved.test_instance.reset();
  filter_ = resolved;
  current_test_index_ = test_index;
}

AgreementRow Session::agreement(size_t test_index) const {
  std::shared_lock lock(mutex_);
  if (test_index >= split_.test.rows()) throw Error(ErrorKind::kNotFound, "test instance out of range");
  const size_t classes = split_.train.num_classes();
  const auto row = split_.test.row(test_index);
  AgreementRow out;
  out.test_index = test_index;
  out.md_votes.assign(classes, 0);
  out.rf_votes.assign(classes, 0);
  out.ab_votes.assign(classes, 0);
  out.ground_truth = split_.test.labels[test_index];
  for (const auto& m : models_) {
    if (!m.active) continue;
    const auto label = static_cast<size_t>(predict(m, row).label);
    (m.algorithm == Algorithm::kRandomForest ? out.rf_votes : out.ab_votes)[label] += 1;
  }
  for (const auto& d : manual_decisions_) {
    if (rule_matches(d, row)) out.md_votes[static_cast<size_t>(d.predicted_class)] += 1;
  }
  std::vector<size_t> pooled(classes);
  for (size_t c = 0; c < classes; ++c) pooled[c] = out.rf_votes[c] + out.ab_votes[c];
  const Verdict v = judge(pooled, out.ground_truth);
  out.majority = v.majority;
  out.unanimous = v.unanimous;
  out.conflict = v.conflict;
  return out;
}

std::vector<size_t> Session::list_conflicts() const {
  const size_t n = test().rows();
  std::vector<size_t> out;
  for (size_t i = 0; i < n; ++i) {
    if (agreement(i).conflict) out.push_back(i);
  }
  return out;
}

Json Session::export_manual_decisions(const std::vector<std::string>& rule_ids) {
  std::unique_lock lock(mutex_);
  if (rule_ids.empty()) throw Error(ErrorKind::kInvalidArgument, "no rules selected for export");
  std::vector<DecisionRule> picked;
  std::set<std::string> seen;
  for (const auto& id : rule_ids) {
    const auto it = rule_index_.find(id);
    if (it == rule_index_.end()) throw Error(ErrorKind::kNotFound, "unknown rule " + id);
    if (seen.insert(id).second) picked.push_back(rules_[it->second]);
  }
  for (const auto& rule : picked) {
    const bool already = std::any_of(manual_decisions_.begin(), manual_decisions_.end(),
                                     [&](const DecisionRule& d) { return d.rule_id == rule.rule_id; });
    if (!already) manual_decisions_.push_back(rule);
  }
  return manual_decisions_document(picked, split_.train.feature_names, split_.train.class_names);
}

void Session::import_manual_decisions(const Json& doc) {
  std::unique_lock lock(mutex_);
  auto imported = rulescope::import_manual_decisions(doc, split_.train.feature_names, split_.train.class_names);
  for (auto& rule : imported) {
    const bool already = std::any_of(manual_decisions_.begin(), manual_decisions_.end(),
                                     [&](const DecisionRule& d) { return d.rule_id == rule.rule_id; });
    if (!already) manual_decisions_.push_back(std::move(rule));
  }
}

ContrastReport Session::contrast(ContrastRequest request) {
  std::unique_lock lock(mutex_);
  if (request.universe.empty()) {
    for (const auto& r : rules_) request.universe.push_back(r.rule_id);
  }
  ContrastReport report = rulescope::contrast(request, rules_, split_.train.bounds);
  selections_["selected"] = request.selected;
  if (request.anchored) {
    selections_["anchored"] = *request.anchored;
  } else {
    selections_.erase("anchored");
  }
  return report;
}

void Session::set_embedding_config(const EmbeddingConfig& config, bool tune) {
  if (config.n_neighbors < kMinNeighbors || config.n_neighbors > kMaxNeighbors) {
    throw Error(ErrorKind::kInvalidArgument, "n_neighbors must be within [2, 100]");
  }
  if (!(config.min_dist >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "min_dist must be non-negative");
  if (config.dbscan_min_pts < 1) throw Error(ErrorKind::kInvalidArgument, "dbscan min_pts must be at least 1");
  std::unique_lock lock(mutex_);
  if (config == embedding_config_ && tune == tune_neighbors_) return;
  embedding_config_ = config;
  tune_neighbors_ = tune;
  schedule_embedding_locked();
}

EmbeddingSnapshot Session::embedding() const {
  std::shared_lock lock(mutex_);
  EmbeddingSnapshot out = embedding_;
  const bool current = embedding_.generation == embedding_generation_;
  out.stale = !current;
  out.ready = current && embedding_.ready;
  out.config = embedding_config_;
  out.tuned = tune_neighbors_;
  return out;
}

EmbeddingSnapshot Session::wait_for_embedding() const {
  {
    std::shared_lock lock(mutex_);
    embedding_cv_.wait(lock, [&] { return embedding_.generation == embedding_generation_; });
  }
  return embedding();
}

int Session::reserve_ids_locked(Algorithm algorithm, int count) {
  auto& next = next_id_[algorithm_tag(algorithm)];
  const int first = next;
  next += count;
  return first;
}

void Session::add_models_locked(std::vector<TrainedModel> models) {
  for (auto& m : models) {
    m.active = false;
    models_.push_back(std::move(m));
  }
}

int Session::start_search(const SearchRequest& request) {
  request.space.validate();
  if (request.iterations < 1) throw Error(ErrorKind::kInvalidArgument, "iterations must be at least 1");
  std::unique_lock lock(mutex_);
  const int job_id = next_job_++;
  auto job = std::make_shared<Job>();
  job->info.id = job_id;
  job->info.total = request.iterations;
  SearchOptions so;
  so.first_id = reserve_ids_locked(request.algorithm, request.iterations);
  so.workers = options_.workers;
  so.progress = &job->progress;
  jobs_[job_id] = job;

  Dataset train = split_.train;
  std::vector<Fold> folds = folds_;
  job->thread = std::jthread([this, job, request, so, train = std::move(train),
                              folds = std::move(folds)](std::stop_token stop) mutable {
    so.stop = stop;
    try {
      SearchResult result = run_search(request, train, folds, so);
      std::unique_lock guard(mutex_);
      for (const auto& m : result.models) job->info.model_ids.push_back(m.id);
      job->info.failures = result.failures;
      job->info.status = stop.stop_requested() ? JobStatus::kCancelled : JobStatus::kDone;
      add_models_locked(std::move(result.models));
    } catch (const std::exception& e) {
      std::unique_lock guard(mutex_);
      job->info.status = stop.stop_requested() ? JobStatus::kCancelled : JobStatus::kFailed;
      job->info.message = e.what();
    }
  });
  return job_id;
}

std::optional<SearchJobInfo> Session::search_job(int id) const {
  std::shared_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  SearchJobInfo info = it->second->info;
  info.progress = info.status == JobStatus::kRunning ? it->second->progress.load() : info.total;
  return info;
}

SearchJobInfo Session::run_search_now(const SearchRequest& request) {
  request.space.validate();
  if (request.iterations < 1) throw Error(ErrorKind::kInvalidArgument, "iterations must be at least 1");
  SearchOptions so;
  Dataset train;
  std::vector<Fold> folds;
  {
    std::unique_lock lock(mutex_);
    so.first_id = reserve_ids_locked(request.algorithm, request.iterations);
    so.workers = options_.workers;
    train = split_.train;
    folds = folds_;
  }
  SearchResult result = run_search(request, train, folds, so);
  SearchJobInfo info;
  info.status = JobStatus::kDone;
  info.total = request.iterations;
  info.progress = request.iterations;
  info.failures = result.failures;
  for (const auto& m : result.models) info.model_ids.push_back(m.id);
  std::unique_lock lock(mutex_);
  add_models_locked(std::move(result.models));
  return info;
}

void Session::wait_for_jobs() {
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs) {
    if (job->thread.joinable()) job->thread.join();
  }
}

}  // namespace rulescope
