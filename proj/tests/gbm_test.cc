#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bofx/error.h"
#include "bofx/evaluation.h"
#include "bofx/gbm.h"
#include "support/toy.h"

namespace bofx {
namespace {

FeatureMatrix column(std::initializer_list<float> values) {
  FeatureMatrix x(1);
  for (float v : values) x.add_row(std::vector<float>{v});
  return x;
}

TrainConfig plain() {
  TrainConfig c;
  c.subsample = 1.0;
  c.colsample_bytree = 1.0;
  c.positive_weight = 1.0;
  return c;
}

TEST(Gbm, NoTreesGivesWeightedBaseRate) {
  const FeatureMatrix x = column({1, 2, 3, 4});
  const std::vector<int> y = {0, 0, 0, 1};
  TrainConfig c = plain();
  c.estimators = 0;
  c.positive_weight = 3.0;
  const GbmModel m = train_gbm(x, y, c);
  EXPECT_NEAR(m.predict_proba(std::vector<float>{2}), 0.5, 1e-12);  // 3 / (3 + 3)
  c.positive_weight = 1.0;
  EXPECT_NEAR(train_gbm(x, y, c).predict_proba(std::vector<float>{9}), 0.25, 1e-12);
}

TEST(Gbm, NewtonLeavesOnFourPoints) {
  // p0 = 0.5: g = p - y = (+.5, +.5, -.5, -.5), h = .25 each.
  // Best split {1,2} | {3,4}: leaves -sum(g)/sum(h) = -1/.5 = -2 and +2.
  const FeatureMatrix x = column({1, 2, 3, 4});
  const std::vector<int> y = {0, 0, 1, 1};
  TrainConfig c = plain();
  c.estimators = 1;
  c.max_depth = 1;
  c.learning_rate = 1.0;
  c.lambda = 0.0;
  c.min_child_weight = 0.0;
  const GbmModel m = train_gbm(x, y, c);
  ASSERT_EQ(m.trees().size(), 1u);
  EXPECT_NEAR(m.base_score(), 0.0, 1e-12);
  const double expected[] = {-2, -2, 2, 2};
  for (int i = 0; i < 4; ++i) {
    const std::vector<float> xi = {float(i + 1)};
    EXPECT_NEAR(m.trees()[0].evaluate(xi) * m.tree_weight(0), expected[i], 1e-12);
    EXPECT_NEAR(m.predict_logit(xi), expected[i], 1e-12);
  }
}

TEST(Gbm, SeparableToyIsFitPerfectly) {
  FeatureMatrix x(1);
  std::vector<int> y;
  for (int i = 0; i <= 10; ++i) {
    x.add_row(std::vector<float>{float(i)});
    y.push_back(i > 5);
  }
  TrainConfig c = plain();
  c.estimators = 10;
  c.max_depth = 1;
  const GbmModel m = train_gbm(x, y, c);
  std::vector<double> scores;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    scores.push_back(m.predict_proba(x.row(r)));
    EXPECT_EQ(scores.back() > 0.5, y[r] == 1);
  }
  EXPECT_EQ(roc_auc(scores, y).auc, 1.0);
}

TEST(Gbm, LogLossNonIncreasingWithoutSubsampling) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMatrix x(6);
  std::vector<int> y;
  for (int i = 0; i < 300; ++i) {
    std::vector<float> r(6);
    for (auto& v : r) v = float(std::round(n(rng) * 2));
    y.push_back(r[0] + r[1] + n(rng) > 0);
    x.add_row(r);
  }
  TrainConfig c = plain();
  c.estimators = 40;
  c.max_depth = 3;
  c.positive_weight = 2.0;
  GbmTrainTrace trace;
  train_gbm(x, y, c, &trace);
  ASSERT_EQ(trace.weighted_logloss.size(), 41u);
  for (std::size_t i = 1; i < trace.weighted_logloss.size(); ++i)
    EXPECT_LE(trace.weighted_logloss[i], trace.weighted_logloss[i - 1] + 1e-12);
}

TEST(Gbm, PredictLogitIsSumOfTrees) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const GbmModel m = testing::random_toy_model(rng);
    const auto x = testing::random_input(rng, m.num_features());
    double f = m.base_score();
    for (std::size_t t = 0; t < m.trees().size(); ++t) f += m.tree_weight(t) * m.trees()[t].evaluate(x);
    EXPECT_NEAR(m.predict_logit(x), f, 1e-12);
  }
}

TEST(Gbm, HandBuiltArithmetic) {
  const Tree leaf({TreeNode{-1, 0, -1, -1, 1.0, 2.0}});
  const GbmModel m(3, -1.0, {leaf}, {0.05}, TrainConfig{});
  EXPECT_NEAR(m.predict_logit(std::vector<float>{0, 0, 0}), -0.9, 1e-12);
  const GbmModel empty(3, 0.0, {}, {}, TrainConfig{});
  EXPECT_EQ(empty.predict_logit(std::vector<float>{5, 5, 5}), 0.0);
}

TEST(Sigmoid, TailAndDerivative) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_LT(1.0 - sigmoid(25.0), 1e-9);
  EXPECT_GT(1.0 - sigmoid(25.0), 0.0);
  for (double z : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    const double h = 1e-5;
    const double fd = (sigmoid(z + h) - sigmoid(z - h)) / (2 * h);
    EXPECT_NEAR(fd, sigmoid(z) * (1 - sigmoid(z)), 1e-9);
  }
}

TEST(Gbm, SingleClassIsTrainingError) {
  const FeatureMatrix x = column({1, 2});
  const std::vector<int> y = {1, 1};
  try {
    train_gbm(x, y, plain());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
  }
}

TEST(Gbm, JsonRoundTripPreservesPredictions) {
  std::mt19937_64 rng(12);
  const GbmModel m = testing::random_toy_model(rng);
  const GbmModel back = GbmModel::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  for (int i = 0; i < 20; ++i) {
    const auto x = testing::random_input(rng, m.num_features());
    EXPECT_EQ(back.predict_logit(x), m.predict_logit(x));
  }
}

TEST(Gbm, DeterministicUnderSeed) {
  std::mt19937_64 rng(5);
  FeatureMatrix x(4);
  std::vector<int> y;
  for (int i = 0; i < 120; ++i) {
    std::vector<float> r(4);
    for (auto& v : r) v = float(rng() % 5);
    y.push_back(r[2] > 2);
    x.add_row(r);
  }
  TrainConfig c;
  c.estimators = 15;
  c.seed = 77;
  EXPECT_EQ(train_gbm(x, y, c).to_json(), train_gbm(x, y, c).to_json());
}

}  // namespace
}  // namespace bofx
