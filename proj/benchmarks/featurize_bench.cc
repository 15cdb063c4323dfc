#include <benchmark/benchmark.h>

#include <numeric>
#include <optional>

#include "bofx/pipeline.h"
#include "bofx/synthgen.h"

namespace {

using namespace bofx;

struct Fixture {
  Fixture() {
    GenConfig g;
    g.wells = 2;
    g.hours = 4;
    g.schedule = {1, 0, 0, 0};
    data = generate(g);
    ExperimentConfig c;
    c.codebooks.max_points_per_channel = 1000;
    c.codebooks.max_iterations = 20;
    books.emplace(fit_codebooks(data.logs, std::vector<std::size_t>{0, 1}, c, 1));
  }
  SyntheticData data;
  std::optional<CodebookSet> books;
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_FeaturizeSegment(benchmark::State& state) {
  const auto& f = fixture();
  const Segment seg(f.data.logs[0], kSegmentSamples);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(seg, *f.books));
}
BENCHMARK(BM_FeaturizeSegment)->Unit(benchmark::kMicrosecond);

void BM_LabelTrackWholeLog(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(LabelTrack(f.data.logs[0], *f.books));
}
BENCHMARK(BM_LabelTrackWholeLog)->Unit(benchmark::kMillisecond);

void BM_LabelTrackFeaturize(benchmark::State& state) {
  const auto& f = fixture();
  const LabelTrack track(f.data.logs[0], *f.books);
  std::size_t end = kSegmentSamples;
  for (auto _ : state) {
    benchmark::DoNotOptimize(track.featurize(end));
    if (++end > f.data.logs[0].size()) end = kSegmentSamples;
  }
}
BENCHMARK(BM_LabelTrackFeaturize)->Unit(benchmark::kMicrosecond);

}  // namespace
