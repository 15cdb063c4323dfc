#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "bofx/bag_of_features.h"
#include "bofx/error.h"
#include "bofx/shap.h"
#include "support/toy.h"

namespace bofx {
namespace {

std::vector<std::size_t> all_features(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

GbmModel stump(std::size_t features, std::int32_t split_feature, double left, double right, double cover_left,
               double cover_right) {
  const Tree t({TreeNode{split_feature, 0.5, 1, 2, cover_left + cover_right, 0.0},
                TreeNode{-1, 0, -1, -1, cover_left, left}, TreeNode{-1, 0, -1, -1, cover_right, right}});
  return GbmModel(features, 0.0, {t}, {1.0}, TrainConfig{});
}

TEST(TreeShap, ConstantModel) {
  const GbmModel m(4, 0.7, {}, {}, TrainConfig{});
  const Attribution a = tree_shap(m, std::vector<float>{1, 2, 3, 4});
  EXPECT_EQ(a.base_value, 0.7);
  for (double p : a.phi) EXPECT_EQ(p, 0.0);
}

TEST(TreeShap, SingleSplitHandValue) {
  const GbmModel m = stump(8, 5, -1.0, 1.0, 50, 50);
  std::vector<float> x(8, 0.0f);
  x[5] = 1.0f;  // routed right
  const Attribution a = tree_shap(m, x);
  EXPECT_NEAR(a.base_value, 0.0, 1e-12);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a.phi[j], j == 5 ? 1.0 : 0.0, 1e-12);
}

TEST(TreeShap, DepthTwoMatchesBruteForce) {
  const Tree t({TreeNode{0, 0.5, 1, 4, 100, 0}, TreeNode{1, 0.5, 2, 3, 30, 0}, TreeNode{-1, 0, -1, -1, 10, -1.5},
                TreeNode{-1, 0, -1, -1, 20, 0.5}, TreeNode{1, 1.5, 5, 6, 70, 0}, TreeNode{-1, 0, -1, -1, 45, 2.0},
                TreeNode{-1, 0, -1, -1, 25, -0.25}});
  const GbmModel m(2, 0.1, {t}, {1.0}, TrainConfig{});
  for (float a : {0.f, 1.f, 2.f})
    for (float b : {0.f, 1.f, 2.f}) {
      const std::vector<float> x = {a, b};
      const Attribution fast = tree_shap(m, x);
      const Attribution slow = brute_force_shapley(m, x, all_features(2));
      EXPECT_NEAR(fast.base_value, slow.base_value, 1e-9);
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(fast.phi[j], slow.phi[j], 1e-9);
    }
}

TEST(TreeShap, RandomToyModelsMatchOracle) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 60; ++k) {
    const GbmModel m = testing::random_toy_model(rng);
    for (int i = 0; i < 10; ++i) {
      const auto x = testing::random_input(rng, m.num_features());
      const Attribution fast = tree_shap(m, x);
      const Attribution slow = brute_force_shapley(m, x, all_features(m.num_features()));
      worst = std::max(worst, std::abs(fast.base_value - slow.base_value));
      for (std::size_t j = 0; j < m.num_features(); ++j) worst = std::max(worst, std::abs(fast.phi[j] - slow.phi[j]));
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(BruteForce, SingleFeature) {
  const GbmModel m = stump(1, 0, -2.0, 3.0, 25, 75);
  const Attribution a = brute_force_shapley(m, std::vector<float>{1.0f}, all_features(1));
  // v({0}) = 3, v({}) = 0.25 * -2 + 0.75 * 3 = 1.75
  EXPECT_NEAR(a.base_value, 1.75, 1e-12);
  EXPECT_NEAR(a.phi[0], 3.0 - 1.75, 1e-12);
}

TEST(BruteForce, SymmetricDuplicatesShareCredit) {
  const Tree t1({TreeNode{0, 0.5, 1, 2, 10, 0}, TreeNode{-1, 0, -1, -1, 5, 0}, TreeNode{-1, 0, -1, -1, 5, 1}});
  const Tree t2({TreeNode{1, 0.5, 1, 2, 10, 0}, TreeNode{-1, 0, -1, -1, 5, 0}, TreeNode{-1, 0, -1, -1, 5, 1}});
  const GbmModel m(2, 0.0, {t1, t2}, {1.0, 1.0}, TrainConfig{});
  const Attribution a = brute_force_shapley(m, std::vector<float>{1, 1}, all_features(2));
  EXPECT_NEAR(a.phi[0], a.phi[1], 1e-12);
}

TEST(BruteForce, EfficiencyAxiom) {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 40; ++k) {
    const GbmModel m = testing::random_toy_model(rng);
    const auto x = testing::random_input(rng, m.num_features());
    const Attribution a = brute_force_shapley(m, x, all_features(m.num_features()));
    EXPECT_NEAR(a.total(), m.predict_logit(x), 1e-9);
  }
}

TEST(BruteForce, CapacityLimit) {
  const GbmModel m(30, 0.0, {}, {}, TrainConfig{});
  try {
    brute_force_shapley(m, std::vector<float>(30, 0.0f), all_features(30));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapacity);
  }
}

TEST(SelectTop, Fixtures) {
  const std::vector<double> imp = {10, 3, 1.9};
  EXPECT_EQ(select_top(imp, 20.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_top(imp, 100.0), (std::vector<std::size_t>{0}));
  const std::vector<double> tie = {4, 1, 4};
  EXPECT_EQ(select_top(tie, 100.0), (std::vector<std::size_t>{0, 2}));
  const std::vector<double> nonpositive = {0, -1, -3};
  EXPECT_TRUE(select_top(nonpositive, 20.0).empty());
}

TEST(SelectTop, MonotoneInM) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> imp(40);
    for (auto& v : imp) v = u(rng);
    std::vector<std::size_t> prev = select_top(imp, 0.5);
    for (double m = 5; m <= 100; m += 5) {
      const auto cur = select_top(imp, m);
      EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      EXPECT_FALSE(cur.empty());
      prev = cur;
    }
  }
}

SegmentIndex index_with(Mnemonic m, std::initializer_list<std::size_t> ks, std::uint16_t cluster) {
  const TauConfig tau{30, 6};
  std::array<std::vector<std::uint16_t>, kNumChannels> labels;
  for (auto& l : labels) l.assign(tau.count(), 199);
  for (std::size_t k : ks) labels[index_of(m)][k] = cluster;
  return SegmentIndex(tau, labels);
}

TEST(Highlight, AdjacentTausMerge) {
  const SegmentIndex idx = index_with(Mnemonic::HKLA, {0, 1}, 7);
  const std::vector<std::size_t> sel = {feature_index(Mnemonic::HKLA, 7)};
  const HighlightSet h = highlight(sel, idx);
  ASSERT_EQ(h.channels.size(), 1u);
  EXPECT_EQ(h.channels[0].channel, Mnemonic::HKLA);
  ASSERT_EQ(h.channels[0].intervals.size(), 1u);
  EXPECT_EQ(h.channels[0].intervals[0], (SampleRange{0, 36}));
  EXPECT_EQ(h.taus.size(), 2u);
}

TEST(Highlight, AbsentClusterAndTwoChannels) {
  const SegmentIndex idx = index_with(Mnemonic::TQA, {3}, 5);
  const std::vector<std::size_t> absent = {feature_index(Mnemonic::BPOS, 5)};
  EXPECT_TRUE(highlight(absent, idx).empty());
  const std::vector<std::size_t> two = {feature_index(Mnemonic::TQA, 5), feature_index(Mnemonic::HKLA, 199)};
  const HighlightSet h = highlight(two, idx);
  ASSERT_EQ(h.channels.size(), 2u);
  EXPECT_EQ(h.channels[0].channel, Mnemonic::HKLA);
  EXPECT_EQ(h.channels[1].channel, Mnemonic::TQA);
  EXPECT_EQ(h.channels[1].intervals[0], (SampleRange{18, 48}));
}

TEST(Explain, ConstantModel) {
  const GbmModel m(kFeatureWidth, 0.3, {}, {}, TrainConfig{});
  const SegmentIndex idx = index_with(Mnemonic::HKLA, {}, 0);
  FeatureVector fv;
  fv.counts[feature_index(Mnemonic::HKLA, 199)] = 56;
  const Explanation e = explain(m, Featurization{fv, idx}, ExplainConfig{});
  EXPECT_NEAR(e.probability, sigmoid(0.3), 1e-15);
  EXPECT_TRUE(e.highlights.empty());
  EXPECT_TRUE(e.selected.empty());
}

TEST(Explain, Deterministic) {
  std::mt19937_64 rng(1);
  std::vector<TreeNode> nodes;
  testing::grow(nodes, rng, kFeatureWidth, 0, 3, 100.0);
  const GbmModel m(kFeatureWidth, 0.0, {Tree(nodes)}, {1.0}, TrainConfig{});
  const SegmentIndex idx = index_with(Mnemonic::HKLA, {}, 0);
  FeatureVector fv;
  for (std::size_t j = 0; j < kFeatureWidth; j += 7) fv.counts[j] = float(j % 5);
  const Featurization f{fv, idx};
  const Explanation a = explain(m, f, ExplainConfig{});
  const Explanation b = explain(m, f, ExplainConfig{});
  EXPECT_EQ(a.attribution.phi, b.attribution.phi);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_NEAR(a.attribution.total(), a.logit, 1e-9);
}

}  // namespace
}  // namespace bofx
