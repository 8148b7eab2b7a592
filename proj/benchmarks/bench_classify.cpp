#include <benchmark/benchmark.h>

#include "sentinel/alarm_logic.hpp"
#include "sentinel/synthkit.hpp"

namespace {

sentinel::Record make(sentinel::synth::Scenario scenario, sentinel::Arrhythmia tag) {
  sentinel::synth::SynthSpec spec;
  spec.scenario = scenario;
  spec.alarm_tag = tag;
  spec.event_rate = 160.0;
  spec.heart_rate = 70.0;
  return sentinel::synth::generate(spec).record;
}

void BM_ClassifyImproved(benchmark::State& state) {
  const auto r = make(sentinel::synth::Scenario::VTach, sentinel::Arrhythmia::VTach);
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::classify_alarm(r, sentinel::Method::Improved));
}
BENCHMARK(BM_ClassifyImproved)->Unit(benchmark::kMillisecond);

void BM_ClassifySelfKl(benchmark::State& state) {
  const auto r = make(sentinel::synth::Scenario::VTach, sentinel::Arrhythmia::VTach);
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::classify_alarm(r, sentinel::Method::DtwSelfKl));
}
BENCHMARK(BM_ClassifySelfKl)->Unit(benchmark::kMillisecond);

void BM_ClassifyGate(benchmark::State& state) {
  const auto r = make(sentinel::synth::Scenario::Sinus, sentinel::Arrhythmia::Asystole);
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::classify_alarm(r, sentinel::Method::Improved));
}
BENCHMARK(BM_ClassifyGate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
