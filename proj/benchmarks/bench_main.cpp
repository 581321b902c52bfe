#include <benchmark/benchmark.h>

#include <vector>

#include "gma/features.hpp"
#include "gma/learn/forest.hpp"
#include "gma/learn/network.hpp"
#include "gma/preprocess.hpp"
#include "gma/random.hpp"
#include "gma/synth.hpp"

namespace {

using namespace gma;

VideoRecord synthetic_record(double seconds) {
  SynthSpec spec;
  spec.n_subjects = 1;
  spec.fps_choices = {30.0};
  spec.min_duration_s = seconds;
  spec.max_duration_s = seconds + 1e-6;
  return generate(spec).records.front();
}

void BM_Angle(benchmark::State& state) {
  SplitMix64 rng(1);
  std::vector<Point2> pts(3000);
  for (auto& p : pts) p = {rng.uniform(0, 640), rng.uniform(0, 480)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(angle(pts[i], pts[i + 1], pts[i + 2]));
    i = (i + 3) % pts.size();
  }
}
BENCHMARK(BM_Angle);

void BM_AngleChannels(benchmark::State& state) {
  const auto record = synthetic_record(10.0);
  Fragment fragment;
  fragment.tracks = record.tracks;
  fragment.pixel_tracks = record.tracks;
  for (auto _ : state) benchmark::DoNotOptimize(angle_channels(fragment));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(record.frames()));
}
BENCHMARK(BM_AngleChannels);

void BM_DetectOutliers(benchmark::State& state) {
  const auto record = synthetic_record(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(detect_outliers(record.tracks));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(record.frames() * kNumKeypoints));
}
BENCHMARK(BM_DetectOutliers)->Arg(10)->Arg(60);

void BM_ForestFit(benchmark::State& state) {
  SplitMix64 rng(2);
  std::vector<FlatSample> samples;
  for (int i = 0; i < 40; ++i) {
    FlatSample s;
    s.label = i % 2;
    for (int d = 0; d < 2440; ++d) s.features.push_back(rng.normal(s.label ? 0.3 : 0.0, 1.0));
    samples.push_back(std::move(s));
  }
  ForestOptions options;
  options.n_trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(RandomForest::fit(samples, options));
}
BENCHMARK(BM_ForestFit)->Arg(170)->Unit(benchmark::kMillisecond);

template <class Net, class Shape>
void BM_NetworkGradient(benchmark::State& state) {
  SplitMix64 rng(3);
  FeatureTensor input(10, static_cast<std::size_t>(state.range(0)), FeatureSet::kAngles);
  for (auto& v : input.values()) v = rng.uniform(0, 3);
  Net net(Shape{10}, 4);
  std::vector<double> gradient(net.parameters().size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.accumulate_gradient(input, 1, gradient));
  }
}
BENCHMARK(BM_NetworkGradient<Cnn1d, CnnShape>)->Arg(240)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NetworkGradient<Lstm, LstmShape>)->Arg(240)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
