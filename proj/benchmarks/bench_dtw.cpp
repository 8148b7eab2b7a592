#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sentinel/beat_banks.hpp"
#include "sentinel/dtw.hpp"

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

void BM_DtwFullSignal(benchmark::State& state) {
  const auto a = noise(1250, 1), b = noise(1250, 2);
  const sentinel::WarpParams p{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::dtw_distance(a, b, p));
}
BENCHMARK(BM_DtwFullSignal)->Arg(0)->Arg(25)->Arg(250)->Unit(benchmark::kMicrosecond);

void BM_BeatDistance(benchmark::State& state) {
  const auto a = noise(95, 3), b = noise(100, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::beat_distance(a, b));
}
BENCHMARK(BM_BeatDistance)->Unit(benchmark::kMicrosecond);

void BM_BankNoveltyStats(benchmark::State& state) {
  sentinel::BeatBank bank;
  for (unsigned i = 0; i < 20; ++i) bank.beats.push_back(sentinel::znormalize(noise(95, 10 + i)));
  for (auto _ : state) benchmark::DoNotOptimize(sentinel::bank_novelty_stats(bank));
}
BENCHMARK(BM_BankNoveltyStats)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
