#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "bofx/error.h"
#include "bofx/evaluation.h"

namespace bofx {
namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

TEST(Roc, HandExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_EQ(roc_auc(s, y).auc, 0.75);
}

TEST(Roc, PerfectSeparation) {
  const std::vector<double> s = {0.1, 0.2, 0.7, 0.9};
  const std::vector<int> y = {0, 0, 1, 1};
  const RocCurve c = roc_auc(s, y);
  EXPECT_EQ(c.auc, 1.0);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
}

TEST(Roc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 8) / 8.0;  // coarse grid: many ties
      y[i] = int(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(roc_auc(s, y).auc, brute_auc(s, y));
  }
}

TEST(Roc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(32);
  std::vector<double> s(40), t(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    s[i] = std::uniform_real_distribution<double>(-2, 2)(rng);
    t[i] = std::exp(3 * s[i]) + 1;
    y[i] = int(i % 3 == 0);
  }
  EXPECT_DOUBLE_EQ(roc_auc(s, y).auc, roc_auc(t, y).auc);
}

TEST(Roc, SingleClassIsError) {
  const std::vector<double> s = {0.1, 0.2};
  const std::vector<int> y = {1, 1};
  EXPECT_THROW(roc_auc(s, y), Error);
}

TEST(FoldPlan, EveryWellOnceAndOrderIndependent) {
  std::vector<std::pair<std::string, std::string>> wells;
  for (int i = 0; i < 5; ++i) wells.push_back({"w" + std::to_string(i), i % 2 ? "Stuck" : "none"});
  const FoldPlan plan = make_fold_plan(wells, 5, 4);
  std::multiset<std::string> seen;
  for (std::size_t f = 0; f < 5; ++f)
    for (const auto& w : plan.test_wells(f)) seen.insert(w);
  EXPECT_EQ(seen.size(), 5u);
  for (const auto& [w, _] : wells) EXPECT_EQ(seen.count(w), 1u);
  auto shuffled = wells;
  std::reverse(shuffled.begin(), shuffled.end());
  const FoldPlan again = make_fold_plan(shuffled, 5, 4);
  for (const auto& [w, _] : wells) EXPECT_EQ(plan.fold_of(w), again.fold_of(w));
}

ProbabilitySeries series(AccidentType t, std::vector<double> prob, double start = 0.0) {
  ProbabilitySeries s;
  s.well_id = "w";
  s.type = t;
  s.start_time = start;
  s.prob = std::move(prob);
  return s;
}

std::vector<ProbabilitySeries> four(std::size_t n) {
  std::vector<ProbabilitySeries> out;
  for (AccidentType t : kAllAccidentTypes) out.push_back(series(t, std::vector<double>(n, 0.0)));
  return out;
}

TEST(Alarms, CrossingInsideCorrectRegion) {
  auto s = four(60);
  s[index_of(AccidentType::Stuck)].prob[30] = 0.9;
  const AccidentEvent ev{"w", AccidentType::Stuck, 400, 250, 450};
  const AlarmResult r = alarm_eval(s, std::vector<AccidentEvent>{ev}, {0.5, 0.5, 0.5, 0.5});
  EXPECT_EQ(r.per_type[0].covered, 1u);
  EXPECT_EQ(r.per_type[0].false_alarms, 0u);
}

TEST(Alarms, WrongTypeCountsAsFalseAlarm) {
  auto s = four(60);
  s[index_of(AccidentType::Stuck)].prob[30] = 0.9;
  const AccidentEvent ev{"w", AccidentType::Mudloss, 400, 250, 450};
  const AlarmResult r = alarm_eval(s, std::vector<AccidentEvent>{ev}, {0.5, 0.5, 0.5, 0.5});
  EXPECT_EQ(r.per_type[index_of(AccidentType::Mudloss)].covered, 0u);
  EXPECT_EQ(r.per_type[index_of(AccidentType::Stuck)].false_alarms, 1u);
}

TEST(Alarms, FalseAlarmRatePerDay) {
  const std::size_t n = 8640 * 3 / 2;  // 1.5 days on the 10-s grid
  auto s = four(n);
  for (std::size_t i : {100u, 5000u, 9000u}) s[0].prob[i] = 0.9;
  const AlarmResult r = alarm_eval(s, std::vector<AccidentEvent>{}, {0.5, 0.5, 0.5, 0.5});
  EXPECT_EQ(r.per_type[0].false_alarms, 3u);
  EXPECT_NEAR(r.per_type[0].false_alarms_per_day(), 2.0, 1e-9);
}

TEST(Thresholds, CoverageTarget) {
  const std::vector<double> maxima = {0.9, 0.8, 0.3, 0.2, 0.1};
  const double t = threshold_for_coverage(maxima, 0.6);
  std::size_t covered = 0;
  for (double m : maxima) covered += m >= t;
  EXPECT_EQ(covered, 3u);
  EXPECT_EQ(t, 0.3);
}

// Six non-overlapping taus of 60 samples.
ExplainedMoment moment(std::initializer_list<std::size_t> hl, SampleRange ref) {
  ExplainedMoment m;
  m.type = AccidentType::Stuck;
  m.tau = {60, 60};
  for (auto& h : m.highlighted) h.assign(6, false);
  for (std::size_t k : hl) m.highlighted[index_of(Mnemonic::HKLA)][k] = true;
  m.references[index_of(Mnemonic::HKLA)] = {ref};
  return m;
}

TEST(ExplanationPr, HandCountedFixture) {
  const std::vector<ExplainedMoment> ms = {moment({3, 5}, {0, 240})};
  const PrResult r = explanation_pr(ms, PrMode::kStrict);
  EXPECT_EQ(r.micro, (PrCounts{1, 1, 3}));
  EXPECT_EQ(r.micro.precision(), 0.5);
  EXPECT_EQ(r.micro.recall(), 0.25);
}

TEST(ExplanationPr, PerfectHighlights) {
  const std::vector<ExplainedMoment> ms = {moment({0, 1}, {0, 120})};
  const PrResult r = explanation_pr(ms, PrMode::kStrict);
  EXPECT_EQ(r.micro.precision(), 1.0);
  EXPECT_EQ(r.micro.recall(), 1.0);
}

TEST(ExplanationPr, ExtendedTpAtLeastStrict) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    ExplainedMoment m = moment({}, {rng() % 200, 200 + rng() % 160});
    m.type = kAllAccidentTypes[rng() % 4];
    m.references[rng() % kNumChannels].push_back({rng() % 100, 100 + rng() % 200});
    for (auto& h : m.highlighted)
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng() % 3 == 0;
    EXPECT_GE(explanation_counts(m, PrMode::kExtended).tp, explanation_counts(m, PrMode::kStrict).tp);
  }
}

TEST(ExplanationPr, EmptyReferenceIsError) {
  ExplainedMoment m = moment({1}, {0, 60});
  m.references[index_of(Mnemonic::HKLA)].clear();
  try {
    explanation_counts(m, PrMode::kStrict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEvaluation);
  }
}

TEST(Baselines, UniformRecallOneAndPrecisionIsCoverage) {
  const ExplainedMoment m = moment({0, 1, 2, 3, 4, 5}, {0, 120});
  ExplainedMoment all = m;
  for (auto& h : all.highlighted) h.assign(6, true);
  const PrCounts c = explanation_counts(all, PrMode::kStrict);
  EXPECT_EQ(c.recall(), 1.0);
  EXPECT_DOUBLE_EQ(c.precision(), 2.0 / (6.0 * kNumChannels));
}

TEST(Baselines, RandomImportance) {
  const auto a = random_importance(10, kFeatureWidth, 3);
  EXPECT_EQ(a, random_importance(10, kFeatureWidth, 3));
  double selected = 0;
  for (const auto& v : a) {
    for (double x : v) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
    selected += double(select_top(v, 30.0).size()) / double(v.size());
  }
  // P(u >= 0.3 max) with max close to 1.
  EXPECT_NEAR(selected / 10.0, 0.70, 0.02);
}

TEST(References, RangesInSegmentOffsets) {
  const std::vector<ReferenceInterval> refs = {{"w", 0, Mnemonic::TQA, 1000, 1600}};
  const ReferenceRanges r = reference_ranges(refs, 400, 10);
  ASSERT_EQ(r[index_of(Mnemonic::TQA)].size(), 1u);
  EXPECT_EQ(r[index_of(Mnemonic::TQA)][0], (SampleRange{60, 120}));
}

}  // namespace
}  // namespace bofx
