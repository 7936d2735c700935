#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <numeric>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "rulescope/error.hpp"
#include "rulescope/serialize.hpp"
#include "rulescope/session.hpp"

using namespace rulescope;

namespace {

SessionOptions fast_options(int iterations = 2) {
  SessionOptions o;
  o.seed = 3;
  o.initial_iterations = iterations;
  o.embedding.n_epochs = 20;
  return o;
}

std::unique_ptr<Session> small_session(int iterations = 2) {
  return Session::create(fixtures::structured_dataset(21, 150, 4, 3), fast_options(iterations));
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

}  // namespace

TEST(Judge, TruthTable) {
  // Unanimous and correct.
  auto v = judge({0, 5, 0}, 1);
  EXPECT_FALSE(v.conflict);
  EXPECT_TRUE(v.unanimous);
  EXPECT_EQ(v.majority, 1);
  // Split vote, majority correct.
  v = judge({1, 4, 0}, 1);
  EXPECT_TRUE(v.conflict);
  EXPECT_FALSE(v.unanimous);
  EXPECT_EQ(v.majority, 1);
  // Unanimous but wrong.
  v = judge({0, 0, 5}, 1);
  EXPECT_TRUE(v.conflict);
  EXPECT_TRUE(v.unanimous);
  EXPECT_EQ(v.majority, 2);
  // Ties go to the lowest class.
  EXPECT_EQ(judge({2, 0, 2}, 2).majority, 0);
  // No votes at all.
  v = judge({0, 0}, 0);
  EXPECT_EQ(v.majority, -1);
  EXPECT_FALSE(v.conflict);
}

TEST(Session, HappinessPoolHasTwentyModels) {
  const Dataset raw = load_csv(fixtures::data_path("world_happiness_2019.csv"), CsvOptions{"Score", {}});
  const Dataset ds = discretize_target(raw, 3).dataset;
  SessionOptions o = fast_options(10);
  const auto s = Session::create(ds, o);
  const auto models = s->models();
  ASSERT_EQ(models.size(), 20u);
  std::set<std::string> ids;
  for (const auto& m : models) {
    ids.insert(m.id);
    EXPECT_TRUE(m.active);
  }
  for (int i = 1; i <= 10; ++i) {
    EXPECT_TRUE(ids.count("RF" + std::to_string(i)));
    EXPECT_TRUE(ids.count("AB" + std::to_string(i)));
  }
  EXPECT_EQ(s->train().rows(), 140u);
  EXPECT_EQ(s->test().rows(), 16u);
  EXPECT_EQ(s->active_ids().size(), 20u);
}

TEST(Session, CreationIsDeterministic) {
  const auto a = small_session();
  const auto b = small_session();
  const auto ma = a->models();
  const auto mb = b->models();
  ASSERT_EQ(ma.size(), mb.size());
  for (size_t i = 0; i < ma.size(); ++i) EXPECT_EQ(Json(ma[i]).dump(), Json(mb[i]).dump());
  EXPECT_EQ(a->fingerprint(), b->fingerprint());
}

TEST(Session, ActivationLimitsRules) {
  const auto s = small_session();
  const auto all_rules = s->rules();
  std::set<std::string> models_with_rules;
  for (const auto& r : all_rules) models_with_rules.insert(r.model_id);
  EXPECT_EQ(models_with_rules.size(), 4u);

  const std::vector<std::string> keep{"RF1", "AB2"};
  EXPECT_TRUE(s->set_active(keep));
  size_t expected = 0;
  for (const auto& r : all_rules) expected += (r.model_id == "RF1" || r.model_id == "AB2") ? 1 : 0;
  const auto rules = s->rules();
  EXPECT_EQ(rules.size(), expected);
  for (const auto& r : rules) EXPECT_TRUE(r.model_id == "RF1" || r.model_id == "AB2");
  EXPECT_EQ(s->active_ids().size(), 2u);
  EXPECT_EQ(s->importance().per_algorithm_stats[0].at("RF").median, s->importance().per_model.at("RF1")[0]);
}

TEST(Session, ActivationErrorsAndIdempotence) {
  const auto s = small_session();
  EXPECT_EQ(kind_of([&] { s->set_active({}); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { s->set_active({"RF1", "RF99"}); }), ErrorKind::kNotFound);
  EXPECT_TRUE(s->set_active({"RF1"}));
  const uint64_t fp = s->fingerprint();
  const auto rules = s->rules();
  EXPECT_FALSE(s->set_active({"RF1"}));
  EXPECT_EQ(s->fingerprint(), fp);
  EXPECT_EQ(s->rules(), rules);
  EXPECT_TRUE(s->set_active({"RF1", "AB1"}));
  EXPECT_NE(s->fingerprint(), fp);
}

TEST(Session, AgreementVotesAreConserved) {
  const auto s = small_session();
  s->set_active({"RF1", "RF2", "AB1"});
  const size_t n = s->test().rows();
  ASSERT_GT(n, 0u);
  std::vector<size_t> conflicts;
  for (size_t i = 0; i < n; ++i) {
    const auto row = s->agreement(i);
    EXPECT_EQ(std::accumulate(row.rf_votes.begin(), row.rf_votes.end(), size_t{0}), 2u);
    EXPECT_EQ(std::accumulate(row.ab_votes.begin(), row.ab_votes.end(), size_t{0}), 1u);
    EXPECT_EQ(std::accumulate(row.md_votes.begin(), row.md_votes.end(), size_t{0}), 0u);
    EXPECT_EQ(row.ground_truth, s->test().labels[i]);
    std::vector<size_t> pooled(row.rf_votes.size());
    for (size_t c = 0; c < pooled.size(); ++c) pooled[c] = row.rf_votes[c] + row.ab_votes[c];
    const auto v = judge(pooled, row.ground_truth);
    EXPECT_EQ(row.conflict, v.conflict);
    if (row.conflict) conflicts.push_back(i);
  }
  EXPECT_EQ(s->list_conflicts(), conflicts);
  EXPECT_EQ(kind_of([&] { s->agreement(n); }), ErrorKind::kNotFound);
}

TEST(Session, ExportRaisesManualVotes) {
  const auto s = small_session();
  const Dataset test = s->test();
  const auto rules = s->rules();
  size_t target = 0;
  std::vector<std::string> matching;
  // Rules span the training bounds, so pick a test row inside them.
  for (target = 0; target < test.rows() && matching.size() < 3; ++target) {
    matching.clear();
    for (const auto& r : rules) {
      if (rule_matches(r, test.row(target))) matching.push_back(r.rule_id);
      if (matching.size() == 3) break;
    }
  }
  ASSERT_EQ(matching.size(), 3u);
  --target;
  const auto before = s->agreement(target);
  const Json doc = s->export_manual_decisions(matching);
  EXPECT_EQ(doc.at("decisions").size(), 3u);
  const auto after = s->agreement(target);
  EXPECT_EQ(std::accumulate(after.md_votes.begin(), after.md_votes.end(), size_t{0}),
            std::accumulate(before.md_votes.begin(), before.md_votes.end(), size_t{0}) + 3);
  EXPECT_EQ(after.rf_votes, before.rf_votes);
  // Exporting the same rules again does not double count.
  s->export_manual_decisions(matching);
  EXPECT_EQ(s->manual_decisions().size(), 3u);
  EXPECT_EQ(kind_of([&] { s->export_manual_decisions({}); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { s->export_manual_decisions({"nope"}); }), ErrorKind::kNotFound);
}

TEST(Session, ImportedDecisionsSurviveDeactivation) {
  const auto s = small_session();
  const auto rules = s->rules();
  const Json doc = s->export_manual_decisions({rules.front().rule_id});
  const auto other = small_session();
  other->import_manual_decisions(doc);
  other->import_manual_decisions(doc);
  EXPECT_EQ(other->manual_decisions().size(), 1u);
  other->set_active({"AB1"});
  EXPECT_EQ(other->manual_decisions().front(), rules.front());
}

TEST(Session, FilterValidation) {
  const auto s = small_session();
  RuleFilter f;
  f.min_support = 5;
  s->set_filter(f, 2);
  EXPECT_EQ(s->filter().min_support, 5u);
  EXPECT_EQ(s->current_test_index(), std::optional<size_t>(2));
  EXPECT_FALSE(s->filter().test_instance.has_value());
  const auto resolved = s->resolve_filter(f, 2);
  ASSERT_TRUE(resolved.test_instance.has_value());
  EXPECT_EQ(resolved.test_instance->size(), 4u);
  EXPECT_EQ(kind_of([&] { s->set_filter(f, 10000); }), ErrorKind::kNotFound);
  f.rounding_decimals = 16;
  EXPECT_EQ(kind_of([&] { s->set_filter(f, std::nullopt); }), ErrorKind::kInvalidArgument);
  f = RuleFilter{};
  f.min_support = 9;
  f.max_support = 3;
  EXPECT_EQ(kind_of([&] { s->set_filter(f, std::nullopt); }), ErrorKind::kInvalidArgument);
}

TEST(Session, ContrastRecordsSelections) {
  const auto s = small_session();
  const auto rules = s->rules();
  ContrastRequest req;
  req.selected = {rules[0].rule_id, rules[1].rule_id};
  req.anchored = std::vector<std::string>{rules[2].rule_id};
  const auto report = s->contrast(req);
  EXPECT_EQ(report.ranked_features.size(), 4u);
  EXPECT_EQ(s->selections().at("selected"), req.selected);
  EXPECT_EQ(s->selections().at("anchored"), *req.anchored);
  req.anchored.reset();
  s->contrast(req);
  EXPECT_EQ(s->selections().count("anchored"), 0u);
}

TEST(Session, EmbeddingPublishesForCurrentState) {
  const auto s = small_session();
  const auto snap = s->wait_for_embedding();
  EXPECT_TRUE(snap.ready);
  EXPECT_FALSE(snap.stale);
  EXPECT_EQ(snap.result.points.size(), s->rules().size());

  s->set_active({"RF2"});
  const auto next = s->wait_for_embedding();
  EXPECT_GT(next.generation, snap.generation);
  EXPECT_EQ(next.result.points.size(), s->rules().size());
  for (const auto& p : next.result.points) EXPECT_EQ(p.rule_id.rfind("RF2:", 0), 0u);

  EmbeddingConfig cfg = next.config;
  cfg.n_neighbors = 7;
  s->set_embedding_config(cfg, false);
  const auto fixed = s->wait_for_embedding();
  EXPECT_EQ(fixed.result.n_neighbors, 7);
  EXPECT_FALSE(fixed.tuned);
  cfg.n_neighbors = 1;
  EXPECT_EQ(kind_of([&] { s->set_embedding_config(cfg, false); }), ErrorKind::kInvalidArgument);
}

TEST(Session, RapidChangesSettleOnLatest) {
  const auto s = small_session();
  for (int k = 0; k < 5; ++k) s->set_active({k % 2 ? "AB1" : "RF1"});
  s->set_active({"AB2"});
  const auto snap = s->wait_for_embedding();
  EXPECT_TRUE(snap.ready);
  for (const auto& p : snap.result.points) EXPECT_EQ(p.rule_id.rfind("AB2:", 0), 0u);
}

TEST(Session, SearchAddsInactiveModels) {
  const auto s = small_session();
  SearchRequest req;
  req.algorithm = Algorithm::kRandomForest;
  req.iterations = 2;
  req.space = default_space(4);
  req.space.n_estimators = {2, 3};
  req.seed = 5;
  const auto info = s->run_search_now(req);
  EXPECT_EQ(info.status, JobStatus::kDone);
  EXPECT_EQ(std::set<std::string>(info.model_ids.begin(), info.model_ids.end()),
            (std::set<std::string>{"RF3", "RF4"}));
  EXPECT_EQ(s->models().size(), 6u);
  EXPECT_EQ(s->active_ids().size(), 4u);

  const int job = s->start_search(req);
  s->wait_for_jobs();
  const auto done = s->search_job(job);
  ASSERT_TRUE(done);
  EXPECT_EQ(done->status, JobStatus::kDone);
  EXPECT_EQ(done->progress, 2);
  EXPECT_EQ(std::set<std::string>(done->model_ids.begin(), done->model_ids.end()),
            (std::set<std::string>{"RF5", "RF6"}));
  EXPECT_FALSE(s->search_job(job + 1));
  EXPECT_TRUE(s->set_active({"RF6"}));

  req.iterations = 0;
  EXPECT_EQ(kind_of([&] { s->start_search(req); }), ErrorKind::kInvalidArgument);
}

TEST(Session, SaveLoadRoundTrip) {
  const auto s = small_session();
  s->set_active({"RF1", "AB1"});
  RuleFilter f;
  f.min_support = 3;
  f.rounding_decimals = 2;
  s->set_filter(f, 1);
  const auto rules = s->rules();
  s->export_manual_decisions({rules[0].rule_id});
  const Json doc = Json::parse(s->save().dump());
  const auto back = Session::load(doc);
  EXPECT_EQ(back->active_ids(), s->active_ids());
  EXPECT_EQ(back->rules(), rules);
  EXPECT_EQ(back->manual_decisions(), s->manual_decisions());
  EXPECT_EQ(back->filter(), s->filter());
  EXPECT_EQ(back->current_test_index(), s->current_test_index());
  EXPECT_EQ(back->fingerprint(), s->fingerprint());
  EXPECT_EQ(back->save(), s->save());
  for (size_t i = 0; i < s->test().rows(); ++i) EXPECT_EQ(back->agreement(i).conflict, s->agreement(i).conflict);

  Json broken = doc;
  broken["version"] = 99;
  EXPECT_EQ(kind_of([&] { Session::load(broken); }), ErrorKind::kParse);
  broken = doc;
  broken.erase("models");
  EXPECT_EQ(kind_of([&] { Session::load(broken); }), ErrorKind::kParse);
}

TEST(Session, RejectsDuplicateModelIds) {
  const auto s = small_session();
  auto models = s->models();
  models.push_back(models.front());
  TrainTestSplit split;
  split.train = s->train();
  split.test = s->test();
  EXPECT_EQ(kind_of([&] { Session(split, models, fast_options()); }), ErrorKind::kConflict);
}

TEST(Session, ConcurrentReadersAndWriters) {
  const auto s = small_session();
  std::atomic<bool> stop{false};
  std::vector<std::jthread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      while (!stop) {
        const auto rules = s->rules();
        const auto snap = s->embedding();
        (void)s->agreement(0);
        EXPECT_GE(rules.size(), 1u);
        (void)snap;
      }
    });
  }
  for (int k = 0; k < 10; ++k) s->set_active({k % 2 ? std::string("RF1") : std::string("AB1"), "RF2"});
  stop = true;
  readers.clear();
  EXPECT_EQ(s->active_ids().size(), 2u);
}
