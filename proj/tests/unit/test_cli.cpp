#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "rulescope/api.hpp"
#include "rulescope/error.hpp"
#include "rulescope/session.hpp"

using namespace rulescope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("rulescope_cli_test_" + std::to_string(::getpid())));
    fs::create_directories(*dir_);
    const Outcome r = run("train --data " + fixtures::data_path("world_happiness_2019.csv") +
                      " --target Score --bins 3 --iterations 3 --seed 5 --session " + path("base.json") +
                      " --out " + path("train_models.json"));
    ASSERT_EQ(r.code, 0) << r.out;
  }

  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }

  static Outcome run(const std::string& args) {
    const std::string cmd = std::string(RULESCOPE_CLI_PATH) + " " + args + " 2>&1";
    Outcome r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  // A private copy of the trained session for tests that modify it.
  static std::string copy_session(const std::string& name) {
    fs::copy_file(path("base.json"), path(name), fs::copy_options::overwrite_existing);
    return path(name);
  }

  static std::unique_ptr<Session> load(const std::string& file) { return Session::load(read_json_file(file)); }

  static fs::path* dir_;
};

fs::path* CliTest::dir_ = nullptr;

}  // namespace

TEST_F(CliTest, MissingTargetIsUsageError) {
  const Outcome r = run("train --data " + fixtures::data_path("world_happiness_2019.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--target"), std::string::npos);
}

TEST_F(CliTest, NoSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST_F(CliTest, UnknownModelFails) {
  const Outcome r = run("rules --session " + path("base.json") + " --models RF99");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("not_found"), std::string::npos);
}

TEST_F(CliTest, MissingSessionFileFails) { EXPECT_EQ(run("rules --session " + path("nope.json")).code, 1); }

TEST_F(CliTest, TrainIsDeterministicAndMatchesModelsPayload) {
  const Outcome r = run("train --data " + fixtures::data_path("world_happiness_2019.csv") +
                    " --target Score --bins 3 --iterations 3 --seed 5 --session " + path("again.json") + " --out " +
                    path("again_models.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(path("again_models.json")), slurp(path("train_models.json")));
  EXPECT_EQ(slurp(path("again.json")), slurp(path("base.json")));
  EXPECT_NE(r.out.find("RF1"), std::string::npos);
  EXPECT_NE(r.out.find("AB3"), std::string::npos);
  const auto session = load(path("base.json"));
  EXPECT_EQ(session->models().size(), 6u);
  EXPECT_EQ(slurp(path("train_models.json")), api::render(api::models(*session)));
}

TEST_F(CliTest, RulesPayloadMatchesLibrary) {
  const Outcome r =
      run("rules --session " + path("base.json") + " --models RF1 AB2 --min-support 20 --out " + path("rules.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("rules:"), std::string::npos);
  auto session = load(path("base.json"));
  session->set_active({"RF1", "AB2"});
  api::RulesQuery q = api::session_query(*session);
  q.filter.min_support = 20;
  EXPECT_EQ(slurp(path("rules.json")), api::render(api::rules(*session, q)));
  const Json payload = Json::parse(slurp(path("rules.json")));
  for (const auto& rule : payload.at("rules")) EXPECT_GE(rule.at("support").get<size_t>(), 20u);
}

TEST_F(CliTest, RulesForTestInstance) {
  const Outcome r = run("rules --session " + path("base.json") + " --test-instance 2 --decimals 2 --out " +
                    path("rules_t.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto session = load(path("base.json"));
  api::RulesQuery q = api::session_query(*session);
  q.filter.rounding_decimals = 2;
  q.test_index = 2;
  EXPECT_EQ(slurp(path("rules_t.json")), api::render(api::rules(*session, q)));
  EXPECT_EQ(run("rules --session " + path("base.json") + " --test-instance 9999").code, 1);
  EXPECT_EQ(run("rules --session " + path("base.json") + " --decimals 16").code, 2);
}

TEST_F(CliTest, ContrastHonoursBins) {
  auto session = load(path("base.json"));
  const auto rules = session->rules();
  ASSERT_GT(rules.size(), 4u);
  {
    std::ofstream out(path("selected.txt"));
    out << rules[0].rule_id << "\n" << rules[1].rule_id << ", " << rules[2].rule_id << "\n";
  }
  const Outcome r = run("contrast --session " + path("base.json") + " --selected " + path("selected.txt") +
                    " --bins 15 --out " + path("contrast.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("bins: 15", 0), 0u) << r.out;
  const Json body{{"selected", {rules[0].rule_id, rules[1].rule_id, rules[2].rule_id}}, {"bins", 15}, {"mode", "overlap"}};
  EXPECT_EQ(slurp(path("contrast.json")), api::render(api::contrast(*session, body)));
  EXPECT_EQ(Json::parse(slurp(path("contrast.json"))).at("ranked_features").size(), 6u);
}

TEST_F(CliTest, ContrastUnknownRuleFails) {
  {
    std::ofstream out(path("bad.txt"));
    out << "[\"RF1:0:424242\"]";
  }
  EXPECT_EQ(run("contrast --session " + path("base.json") + " --selected " + path("bad.txt")).code, 1);
  EXPECT_EQ(run("contrast --session " + path("base.json") + " --selected " + path("bad.txt") + " --mode sideways").code,
            2);
}

TEST_F(CliTest, ExportThenAgreement) {
  const std::string file = copy_session("export.json");
  auto before = load(file);
  // Some test rows fall outside the training bounds and match no rule.
  const auto rules = before->rules();
  size_t t = 0;
  std::vector<std::string> matching;
  for (; t < before->test().rows() && matching.size() < 2; ++t) {
    matching.clear();
    for (const auto& r : rules) {
      if (rule_matches(r, before->test().row(t))) matching.push_back(r.rule_id);
      if (matching.size() == 2) break;
    }
  }
  ASSERT_EQ(matching.size(), 2u);
  --t;
  std::string ids;
  for (const auto& id : matching) ids += " " + id;
  const Json before_row = api::agreement(*before, t);

  Outcome r = run("export --session " + file + " --rule-ids" + ids + " --out " + path("export_out.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const Json exported = Json::parse(slurp(path("export_out.json")));
  EXPECT_EQ(exported.at("decisions").size(), matching.size());

  r = run("agreement --session " + file + " --test-instance " + std::to_string(t) + " --out " + path("agreement.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const Json after_row = Json::parse(slurp(path("agreement.json")));
  size_t md_before = 0, md_after = 0;
  for (const auto& [name, v] : before_row.at("md_votes").items()) md_before += v.get<size_t>();
  for (const auto& [name, v] : after_row.at("md_votes").items()) md_after += v.get<size_t>();
  EXPECT_EQ(md_after, md_before + matching.size());
  auto after = load(file);
  EXPECT_EQ(after->manual_decisions().size(), matching.size());
  EXPECT_EQ(slurp(path("agreement.json")), api::render(api::agreement(*after, t)));

  r = run("agreement --session " + file + " --conflicts --out " + path("conflicts.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(path("conflicts.json")), api::render(api::conflicts(*after)));
  EXPECT_NE(r.out.find("conflicted of"), std::string::npos);
  EXPECT_EQ(run("agreement --session " + file).code, 2);
  EXPECT_EQ(run("export --session " + file).code, 2);
}

TEST_F(CliTest, SearchAddsInactiveModels) {
  const std::string file = copy_session("search.json");
  const Outcome r = run("search --session " + file +
                    " --algorithm RF --iterations 2 --seed 4 --n-estimators 2:4 --max-depth 3 --out " +
                    path("search_out.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const Json job = Json::parse(slurp(path("search_out.json")));
  auto ids = job.at("model_ids").get<std::vector<std::string>>();
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, (std::vector<std::string>{"RF4", "RF5"}));
  const auto session = load(file);
  ASSERT_EQ(session->models().size(), 8u);
  for (const auto& m : session->models()) {
    const bool added = m.id == "RF4" || m.id == "RF5";
    EXPECT_EQ(m.active, !added) << m.id;
    if (added) {
      EXPECT_EQ(m.params.max_depth, 3);
      EXPECT_GE(m.params.n_estimators, 2);
      EXPECT_LE(m.params.n_estimators, 4);
    }
  }
  EXPECT_EQ(run("search --session " + file + " --algorithm RF --max-depth 5:3").code, 1);
  EXPECT_EQ(run("search --session " + file + " --algorithm XX").code, 2);
}

TEST_F(CliTest, EmbedWritesLayout) {
  const Outcome r = run("embed --session " + path("base.json") + " --n-epochs 20 --embedding-seed 2 --out " +
                    path("embed.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("clusters:"), std::string::npos);
  const Json payload = Json::parse(slurp(path("embed.json")));
  EXPECT_EQ(payload.at("points").size(), load(path("base.json"))->rules().size());
}
