#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "bofx/bag_of_features.h"
#include "bofx/gbm.h"
#include "bofx/shap.h"
#include "support/toy.h"

namespace {

using namespace bofx;

GbmModel trained_model(std::size_t estimators, std::size_t depth) {
  std::mt19937_64 rng(1);
  FeatureMatrix x(kFeatureWidth);
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    std::vector<float> r(kFeatureWidth, 0.0f);
    for (int j = 0; j < 672; ++j) r[rng() % kFeatureWidth] += 1.0f;
    y.push_back(r[3] + r[17] > r[40]);
    x.add_row(r);
  }
  TrainConfig c;
  c.estimators = estimators;
  c.max_depth = depth;
  return train_gbm(x, y, c);
}

void BM_TreeShapFull(benchmark::State& state) {
  const GbmModel m = trained_model(static_cast<std::size_t>(state.range(0)), 6);
  std::mt19937_64 rng(2);
  std::vector<float> x(kFeatureWidth, 0.0f);
  for (int j = 0; j < 672; ++j) x[rng() % kFeatureWidth] += 1.0f;
  for (auto _ : state) benchmark::DoNotOptimize(tree_shap(m, x));
}
BENCHMARK(BM_TreeShapFull)->Arg(25)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_TreeShapToy(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const GbmModel m = testing::random_toy_model(rng);
  const auto x = testing::random_input(rng, m.num_features());
  for (auto _ : state) benchmark::DoNotOptimize(tree_shap(m, x));
}
BENCHMARK(BM_TreeShapToy);

void BM_BruteForceToy(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const GbmModel m = testing::random_toy_model(rng);
  const auto x = testing::random_input(rng, m.num_features());
  std::vector<std::size_t> all(m.num_features());
  std::iota(all.begin(), all.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_shapley(m, x, all));
}
BENCHMARK(BM_BruteForceToy);

}  // namespace
