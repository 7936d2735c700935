#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "rulescope/contrast.hpp"
#include "rulescope/dataset.hpp"
#include "rulescope/ensemble.hpp"
#include "rulescope/importance.hpp"
#include "rulescope/rule_space.hpp"
#include "rulescope/rules.hpp"
#include "rulescope/search.hpp"
#include "rulescope/serialize.hpp"

namespace rulescope {

struct SessionOptions {
  SplitSpec split;
  uint64_t seed = 7;
  int initial_iterations = 10;       // per algorithm
  EmbeddingConfig embedding;
  bool tune_neighbors = true;
  unsigned workers = 0;
};

struct AgreementRow {
  size_t test_index = 0;
  std::vector<size_t> md_votes;
  std::vector<size_t> rf_votes;
  std::vector<size_t> ab_votes;
  int ground_truth = 0;
  int majority = 0;
  bool unanimous = true;
  bool conflict = false;
};

struct Verdict {
  int majority = 0;
  bool unanimous = true;
  bool conflict = false;
};

/// Pooled vote over all active models: conflict when the models are split
/// or their majority (lowest class on ties) differs from the ground truth.
Verdict judge(const std::vector<size_t>& pooled_votes, int ground_truth);

enum class JobStatus { kRunning, kDone, kFailed, kCancelled };
const char* job_status_name(JobStatus s);

struct SearchJobInfo {
  int id = 0;
  JobStatus status = JobStatus::kRunning;
  int progress = 0;
  int total = 0;
  std::vector<std::string> model_ids;
  std::vector<CandidateFailure> failures;
  std::string message;
};

struct EmbeddingSnapshot {
  uint64_t generation = 0;
  bool ready = false;  // false until the first layout for the current state lands
  bool stale = false;  // a newer layout is being computed
  EmbeddingConfig config;  // the requested configuration
  bool tuned = true;
  EmbeddingResult result;
};

/// The mutable world behind the service: train/test data, the model pool and
/// its active subset, the rules extracted from active models, filters,
/// selections and exported manual decisions. Readers share a lock; writers
/// are exclusive. The embedding and model searches run on background threads
/// and publish their results atomically.
class Session {
 public:
  /// Splits the data and trains the initial pool (initial_iterations models
  /// per algorithm, all active).
  static std::unique_ptr<Session> create(const Dataset& full, const SessionOptions& options);

  /// Restores a saved session document.
  static std::unique_ptr<Session> load(const Json& doc, const SessionOptions& options = {});

  Session(TrainTestSplit split, std::vector<TrainedModel> models, const SessionOptions& options);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  Json save() const;

  // Snapshots of state, copied under the shared lock.
  Dataset train() const;
  Dataset test() const;
  std::vector<TrainedModel> models() const;
  std::vector<std::string> active_ids() const;
  std::vector<DecisionRule> rules() const;
  std::vector<DecisionRule> manual_decisions() const;
  ImportanceTable importance() const;
  RuleFilter filter() const;
  std::optional<size_t> current_test_index() const;
  std::map<std::string, std::vector<std::string>> selections() const;
  uint64_t fingerprint() const;

  /// Returns false when the set is unchanged (nothing recomputed).
  bool set_active(const std::vector<std::string>& ids);

  /// test_index (when set) limits rules to those matching that test row.
  void set_filter(const RuleFilter& filter, std::optional<size_t> test_index);
  RuleFilter resolve_filter(RuleFilter filter, std::optional<size_t> test_index) const;

  AgreementRow agreement(size_t test_index) const;
  std::vector<size_t> list_conflicts() const;

  /// Appends snapshots of the given current rules and returns the export
  /// document for exactly those rules.
  Json export_manual_decisions(const std::vector<std::string>& rule_ids);
  void import_manual_decisions(const Json& doc);

  ContrastReport contrast(ContrastRequest request);

  void set_embedding_config(const EmbeddingConfig& config, bool tune);
  EmbeddingSnapshot embedding() const;
  /// Blocks until the layout for the current state is published.
  EmbeddingSnapshot wait_for_embedding() const;

  int start_search(const SearchRequest& request);
  std::optional<SearchJobInfo> search_job(int id) const;
  /// Runs a search on the calling thread and adds its models (inactive).
  SearchJobInfo run_search_now(const SearchRequest& request);
  void wait_for_jobs();

 private:
  struct Job;

  void rebuild_locked();
  void schedule_embedding_locked();
  void embedding_worker(std::stop_token stop);
  int reserve_ids_locked(Algorithm algorithm, int count);
  void add_models_locked(std::vector<TrainedModel> models);
  uint64_t fingerprint_locked() const;

  mutable std::shared_mutex mutex_;
  SessionOptions options_;
  TrainTestSplit split_;
  std::vector<Fold> folds_;
  std::vector<TrainedModel> models_;
  std::vector<DecisionRule> rules_;
  std::map<std::string, size_t> rule_index_;
  ImportanceTable importance_;
  RuleFilter filter_;
  std::optional<size_t> current_test_index_;
  std::map<std::string, std::vector<std::string>> selections_;
  std::vector<DecisionRule> manual_decisions_;
  std::map<std::string, int> next_id_;

  // Embedding worker state, guarded by mutex_.
  EmbeddingConfig embedding_config_;
  bool tune_neighbors_ = true;
  uint64_t embedding_generation_ = 0;
  EmbeddingSnapshot embedding_;
  std::stop_source embedding_cancel_;
  mutable std::condition_variable_any embedding_cv_;

  std::map<int, std::shared_ptr<Job>> jobs_;
  int next_job_ = 1;

  std::jthread embedding_thread_;
};

}  // namespace rulescope
