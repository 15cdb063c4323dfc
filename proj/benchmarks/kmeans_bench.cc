#include <benchmark/benchmark.h>

#include <random>

#include "bofx/kmeans.h"

namespace {

using namespace bofx;

std::vector<double> points(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> out(n * dim);
  for (double& v : out) v = g(rng);
  return out;
}

void BM_KMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = points(n, 30);
  KMeansConfig c;
  c.k = 200;
  c.max_iterations = 20;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(pts, 30, c));
}
BENCHMARK(BM_KMeans)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_NearestCentroid(benchmark::State& state) {
  const auto centroids = points(200, 30);
  const auto x = points(1, 30);
  for (auto _ : state) benchmark::DoNotOptimize(nearest_centroid(centroids, 30, x));
}
BENCHMARK(BM_NearestCentroid);

}  // namespace
