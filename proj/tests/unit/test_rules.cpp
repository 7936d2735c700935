#include <gtest/gtest.h>

#include <numeric>

#include "fixtures.hpp"
#include "rulescope/error.hpp"
#include "rulescope/rules.hpp"

using namespace rulescope;

namespace {

TrainedModel forest(const Dataset& ds, uint64_t seed, int trees = 3, int depth = 5) {
  HyperParams p;
  p.n_estimators = trees;
  p.max_depth = depth;
  p.max_features = static_cast<int>(std::max<size_t>(1, ds.cols() / 2));
  p.seed = seed;
  TrainedModel m = fit_rf(ds, p);
  m.id = "RF1";
  return m;
}

DecisionRule box(std::vector<Interval> intervals, size_t support = 10, double impurity = 0.0,
                 const std::string& id = "R:0:1") {
  DecisionRule r;
  r.rule_id = id;
  r.intervals = std::move(intervals);
  r.support = support;
  r.impurity = impurity;
  return r;
}

}  // namespace

TEST(ExtractRules, StumpIntervals) {
  const Dataset ds = fixtures::make_dataset({{0, 5}, {1, 3}, {2, 4}, {10, 5}, {11, 3}}, {0, 0, 0, 1, 1}, 2);
  HyperParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  TrainedModel m = fit_ab(ds, p);
  m.id = "AB1";
  const auto rules = extract_rules(m, ds);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].intervals[0], (Interval{0, 6}));
  EXPECT_EQ(rules[1].intervals[0], (Interval{6, 11}));
  for (const auto& r : rules) EXPECT_EQ(r.intervals[1], (Interval{3, 5}));
  EXPECT_EQ(rules[0].predicted_class, 0);
  EXPECT_EQ(rules[1].predicted_class, 1);
  EXPECT_EQ(rules[0].support, 3u);
  EXPECT_EQ(rules[1].support, 2u);
  EXPECT_EQ(rules[0].rule_id, "AB1:0:" + std::to_string(rules[0].leaf_id));
  EXPECT_EQ(rules[0].algorithm, Algorithm::kAdaBoost);
  EXPECT_DOUBLE_EQ(rules[0].impurity, 0.0);
}

TEST(ExtractRules, OneRulePerLeafAndSupportsPartitionRows) {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    const Dataset ds = fixtures::structured_dataset(seed, 40 + seed * 6, 1 + seed % 6, 2 + seed % 3);
    const TrainedModel m = forest(ds, seed);
    const auto rules = extract_rules(m, ds);
    size_t leaves = 0;
    for (const auto& t : m.trees) {
      for (const auto& n : t.nodes) leaves += n.is_leaf() ? 1 : 0;
    }
    ASSERT_EQ(rules.size(), leaves);
    for (size_t t = 0; t < m.trees.size(); ++t) {
      std::vector<int> owner(ds.rows(), 0);
      size_t total = 0;
      for (const auto& r : rules) {
        if (r.tree_index != static_cast<int>(t)) continue;
        total += r.support;
        EXPECT_EQ(r.support, r.covered_instances.size());
        EXPECT_EQ(std::accumulate(r.class_counts.begin(), r.class_counts.end(), size_t{0}), r.support);
        for (size_t i : r.covered_instances) owner[i] += 1;
      }
      EXPECT_EQ(total, ds.rows());
      for (int o : owner) EXPECT_EQ(o, 1);
    }
  }
}

TEST(ExtractRules, MatchesAgreeWithTreePrediction) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset ds = fixtures::random_dataset(seed, 120, 4, 3, 12);
    const TrainedModel m = forest(ds, seed, 2, 6);
    const auto rules = extract_rules(m, ds);
    for (size_t i = 0; i < ds.rows(); ++i) {
      for (size_t t = 0; t < m.trees.size(); ++t) {
        const auto leaf = predict(m.trees[t], ds.row(i));
        bool own = false;
        for (const auto& r : rules) {
          if (r.tree_index != static_cast<int>(t) || r.leaf_id != leaf.leaf) continue;
          own = true;
          EXPECT_TRUE(rule_matches(r, ds.row(i)));
          EXPECT_EQ(r.predicted_class, leaf.label);
        }
        EXPECT_TRUE(own);
      }
    }
  }
}

TEST(ExtractRules, ExactlyOneRuleFiresOffThresholds) {
  // Fitted on every row, so no training value sits on a midpoint threshold.
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset ds = fixtures::random_dataset(seed, 100, 3, 2, 12);
    HyperParams p;
    p.n_estimators = 3;
    p.max_depth = 4;
    p.seed = seed;
    TrainedModel m = fit_ab(ds, p);
    m.id = "AB1";
    const auto rules = extract_rules(m, ds);
    for (size_t i = 0; i < ds.rows(); ++i) {
      for (size_t t = 0; t < m.trees.size(); ++t) {
        size_t matches = 0;
        for (const auto& r : rules) {
          if (r.tree_index == static_cast<int>(t) && rule_matches(r, ds.row(i))) {
            ++matches;
            EXPECT_EQ(r.leaf_id, predict(m.trees[t], ds.row(i)).leaf);
          }
        }
        EXPECT_EQ(matches, 1u);
      }
    }
  }
}

TEST(ExtractRules, ImpurityFromCoveredCounts) {
  const Dataset ds = fixtures::random_dataset(3, 60, 2, 2, 4);
  const TrainedModel m = forest(ds, 3, 2, 2);
  for (const auto& r : extract_rules(m, ds)) {
    if (r.support == 0) continue;
    const std::vector<double> counts(r.class_counts.begin(), r.class_counts.end());
    EXPECT_DOUBLE_EQ(r.impurity, gini(counts));
  }
}

TEST(ExtractRules, SchemaMismatchThrows) {
  const Dataset ds = fixtures::structured_dataset(1, 30, 3, 2);
  const TrainedModel m = forest(ds, 1);
  const Dataset other = fixtures::structured_dataset(1, 30, 2, 2);
  EXPECT_THROW(extract_rules(m, other), Error);
}

TEST(RoundInterval, WidensToGrid) {
  EXPECT_EQ(round_interval({0.333333, 0.666666}, 2), (Interval{0.33, 0.67}));
  EXPECT_EQ(round_interval({-1.234, 4.561}, 1), (Interval{-1.3, 4.6}));
  EXPECT_EQ(round_interval({2.0, 3.0}, 0), (Interval{2.0, 3.0}));
}

TEST(RoundInterval, FifteenDecimalsKeepsValues) {
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    const double a = rng.uniform_real(-10, 10);
    const Interval iv{a, a + rng.uniform_real()};
    const Interval r = round_interval(iv, 15);
    EXPECT_LE(r.lo, iv.lo);
    EXPECT_GE(r.hi, iv.hi);
    EXPECT_NEAR(r.lo, iv.lo, 1e-14);
    EXPECT_NEAR(r.hi, iv.hi, 1e-14);
  }
}

TEST(RoundInterval, IdempotentAndNeverShrinks) {
  Rng rng(6);
  for (int k = 0; k < 2000; ++k) {
    const double a = rng.uniform_real(-100, 100);
    const Interval iv{a, a + rng.uniform_real(0, 50)};
    const int d = static_cast<int>(rng.uniform_index(16));
    const Interval once = round_interval(iv, d);
    EXPECT_EQ(round_interval(once, d), once);
    EXPECT_LE(once.lo, iv.lo);
    EXPECT_GE(once.hi, iv.hi);
    EXPECT_LE(iv.lo - once.lo, std::pow(10.0, -d) * (1 + 1e-9));
    EXPECT_LE(once.hi - iv.hi, std::pow(10.0, -d) * (1 + 1e-9));
  }
}

TEST(RoundInterval, NegativeDecimalsThrow) { EXPECT_THROW(round_interval({0, 1}, -1), Error); }

TEST(RuleMatches, Boundaries) {
  const DecisionRule r = box({{0, 1}, {2, 3}});
  EXPECT_TRUE(rule_matches(r, std::vector<double>{0.0, 2.0}));
  EXPECT_TRUE(rule_matches(r, std::vector<double>{1.0, 3.0}));
  EXPECT_FALSE(rule_matches(r, std::vector<double>{1.0001, 2.5}));
  EXPECT_FALSE(rule_matches(r, std::vector<double>{0.5, 1.9}));
  EXPECT_THROW(rule_matches(r, std::vector<double>{0.5}), Error);
}

TEST(RuleMatches, FullRangeRuleMatchesAllTrainingRows) {
  const Dataset ds = fixtures::structured_dataset(4, 50, 3, 2);
  std::vector<Interval> full;
  for (const auto& b : ds.bounds) full.push_back({b.min, b.max});
  const DecisionRule r = box(full);
  for (size_t i = 0; i < ds.rows(); ++i) EXPECT_TRUE(rule_matches(r, ds.row(i)));
}

TEST(Filter, SupportHidesImpurityDims) {
  const std::vector<DecisionRule> rules{box({{0, 1}}, 5, 0.0, "a"), box({{0, 1}}, 20, 0.0, "b"),
                                        box({{0, 1}}, 30, 0.4, "c"), box({{0, 1}}, 19, 0.4, "d")};
  RuleFilter f;
  f.min_support = 20;
  auto out = apply_filter(rules, f);
  EXPECT_EQ(out.visible, (std::vector<std::string>{"b", "c"}));
  EXPECT_TRUE(out.dimmed.empty());
  f.max_impurity = 0.0;
  out = apply_filter(rules, f);
  EXPECT_EQ(out.visible, (std::vector<std::string>{"b"}));
  EXPECT_EQ(out.dimmed, (std::vector<std::string>{"c"}));
  f = RuleFilter{};
  f.max_support = 19;
  out = apply_filter(rules, f);
  EXPECT_EQ(out.visible, (std::vector<std::string>{"a", "d"}));
}

TEST(Filter, DefaultShowsEverything) {
  const std::vector<DecisionRule> rules{box({{0, 1}}, 0, 0.6, "a"), box({{0, 1}}, 3, 0.0, "b")};
  EXPECT_EQ(apply_filter(rules, RuleFilter{}).visible.size(), 2u);
}

TEST(Filter, TestInstanceUsesRoundedBounds) {
  const std::vector<DecisionRule> rules{box({{0.0, 0.333333}}, 5, 0.0, "a"), box({{0.5, 1}}, 5, 0.0, "b")};
  RuleFilter f;
  f.test_instance = std::vector<double>{0.335};
  EXPECT_TRUE(apply_filter(rules, f).visible.empty());
  f.rounding_decimals = 2;
  EXPECT_EQ(apply_filter(rules, f).visible, (std::vector<std::string>{"a"}));
  f.test_instance = std::vector<double>{0.75};
  EXPECT_EQ(apply_filter(rules, f).visible, (std::vector<std::string>{"b"}));
}

TEST(Filter, InvertedSupportRangeThrows) {
  RuleFilter f;
  f.min_support = 10;
  f.max_support = 5;
  EXPECT_THROW(apply_filter({}, f), Error);
}
