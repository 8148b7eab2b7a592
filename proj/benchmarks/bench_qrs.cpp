#include <benchmark/benchmark.h>

#include "sentinel/beats.hpp"
#include "sentinel/synthkit.hpp"

namespace {

const sentinel::Record& record() {
  static const auto r = [] {
    sentinel::synth::SynthSpec spec;
    spec.duration_s = 60.0;
    return sentinel::synth::generate(spec).record;
  }();
  return r;
}

void BM_DetectQrs(benchmark::State& state) {
  const auto& r = record();
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::detect_qrs(r.channel(0), r.sample_rate));
}
BENCHMARK(BM_DetectQrs)->Unit(benchmark::kMillisecond);

void BM_DetectPulses(benchmark::State& state) {
  const auto& r = record();
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::detect_pulses(r.channel(2), r.sample_rate));
}
BENCHMARK(BM_DetectPulses)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
