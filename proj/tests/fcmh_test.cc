#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "bofx/bag_of_features.h"
#include "bofx/fcmh.h"

namespace bofx {
namespace {

FcmhConfig toy_config() {
  FcmhConfig c;
  c.num_features = 6;
  c.embed_dim = 2;
  c.heads = 2;
  c.hidden = 4;
  c.dropout = 0.0;
  c.input_scale = 1.0;
  return c;
}

FeatureMatrix toy_rows(std::size_t n, std::size_t width, std::uint64_t seed, std::vector<int>& y) {
  std::mt19937_64 rng(seed);
  FeatureMatrix x(width);
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> r(width);
    for (auto& v : r) v = float(rng() % 4);
    y.push_back(r[0] > r[1] ? 1 : 0);
    x.add_row(r);
  }
  return x;
}

std::vector<std::vector<double>*> params_of(FcmhParams& p) {
  std::vector<std::vector<double>*> out;
  p.for_each([&](const char*, std::vector<double>& v) { out.push_back(&v); });
  return out;
}

TEST(Fcmh, GradientMatchesFiniteDifferences) {
  const FcmhConfig cfg = toy_config();
  FcmhModel model(cfg, 5);
  std::vector<int> y;
  const FeatureMatrix x = toy_rows(5, 6, 2, y);
  std::vector<std::size_t> rows(5);
  std::iota(rows.begin(), rows.end(), 0);

  FcmhParams grad = FcmhParams::zeros(cfg);
  fcmh_loss(model, x, rows, y, 2.0, &grad);
  auto analytic = params_of(grad);
  auto weights = params_of(model.mutable_params());
  ASSERT_EQ(analytic.size(), weights.size());

  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t p = 0; p < weights.size(); ++p) {
    for (std::size_t i = 0; i < weights[p]->size(); ++i) {
      double& w = (*weights[p])[i];
      const double keep = w;
      w = keep + h;
      const double up = fcmh_loss(model, x, rows, y, 2.0, nullptr);
      w = keep - h;
      const double down = fcmh_loss(model, x, rows, y, 2.0, nullptr);
      w = keep;
      const double fd = (up - down) / (2 * h);
      const double a = (*analytic[p])[i];
      const double scale = std::max({std::abs(a), std::abs(fd), 1e-6});
      worst = std::max(worst, std::abs(a - fd) / scale);
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Fcmh, ImportanceIsADistribution) {
  FcmhModel model(FcmhConfig{}, 3);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 3; ++k) {
    std::vector<float> x(kFeatureWidth, 0.0f);
    for (int j = 0; j < 300; ++j) x[rng() % kFeatureWidth] += 1.0f;
    const FcmhOutput out = model.forward(x);
    EXPECT_NEAR(std::accumulate(out.importance.begin(), out.importance.end(), 0.0), 1.0, 1e-6);
    for (double v : out.importance) ASSERT_GE(v, 0.0);
    EXPECT_NEAR(out.probability[0] + out.probability[1], 1.0, 1e-9);
    EXPECT_EQ(model.importance(x), out.importance);
  }
}

TEST(Fcmh, ZeroInputGivesUniformImportance) {
  FcmhModel model(FcmhConfig{}, 8);
  const std::vector<float> zero(kFeatureWidth, 0.0f);
  for (double v : model.importance(zero)) ASSERT_NEAR(v, 1.0 / kFeatureWidth, 1e-12);
}

TEST(Fcmh, ZeroLearningRateKeepsWeights) {
  const FcmhConfig cfg = toy_config();
  std::vector<int> y;
  const FeatureMatrix x = toy_rows(40, 6, 4, y);
  FcmhTrainConfig t;
  t.learning_rate = 0.0;
  t.epochs = 3;
  t.seed = 9;
  const FcmhModel trained = train_fcmh(x, y, cfg, t);
  const FcmhModel initial(cfg, t.seed);
  FcmhParams a = trained.params(), b = initial.params();
  auto pa = params_of(a), pb = params_of(b);
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
}

TEST(Fcmh, SeparableToyReachesFullAccuracy) {
  const FcmhConfig cfg = toy_config();
  std::vector<int> y;
  const FeatureMatrix x = toy_rows(40, 6, 6, y);
  FcmhTrainConfig t;
  t.learning_rate = 0.2;
  t.epochs = 200;
  t.batch_size = 8;
  t.positive_weight = 1.0;
  std::vector<FcmhEpoch> log;
  const FcmhModel m = train_fcmh(x, y, cfg, t, &log);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) correct += (m.predict_proba(x.row(r)) > 0.5) == (y[r] == 1);
  EXPECT_EQ(correct, x.rows());
  EXPECT_LT(log.back().loss, log.front().loss);
}

TEST(Fcmh, LossDropsOverFirstEpochOnFixedBatch) {
  const FcmhConfig cfg = toy_config();
  std::vector<int> y;
  const FeatureMatrix x = toy_rows(16, 6, 10, y);
  FcmhTrainConfig t;
  t.learning_rate = 0.01;
  t.epochs = 1;
  t.batch_size = 16;
  t.seed = 2;
  std::vector<std::size_t> rows(16);
  std::iota(rows.begin(), rows.end(), 0);
  const double before = fcmh_loss(FcmhModel(cfg, t.seed), x, rows, y, t.positive_weight, nullptr);
  const double after = fcmh_loss(train_fcmh(x, y, cfg, t), x, rows, y, t.positive_weight, nullptr);
  EXPECT_LT(after, before);
}

TEST(Fcmh, JsonRoundTrip) {
  const FcmhModel m(toy_config(), 4);
  EXPECT_EQ(FcmhModel::from_json(m.to_json()).to_json(), m.to_json());
}

}  // namespace
}  // namespace bofx
