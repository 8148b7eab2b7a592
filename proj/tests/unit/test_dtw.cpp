#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sentinel/dtw.hpp"
#include "sentinel/error.hpp"
#include "sentinel/synthkit.hpp"

using namespace sentinel;

namespace {

std::vector<double> random_seq(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("znormalize") {
  const auto z = znormalize(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(z[0] == doctest::Approx(-std::sqrt(1.5)));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(std::sqrt(1.5)));
  const auto zz = znormalize(z);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(zz[i] - z[i]) < 1e-9);
  CHECK(code_of([] { znormalize(std::vector<double>{5, 5, 5}); }) == ErrorCode::ZeroVariance);
  CHECK(code_of([] { znormalize(std::vector<double>{5}); }) == ErrorCode::InsufficientData);
}

TEST_CASE("dtw_distance basics") {
  const std::vector<double> a{0.0, 0.0}, b{1.0, 1.0};
  CHECK(dtw_distance(a, b, {0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(dtw_distance(b, b, {0}) == 0.0);
  const std::vector<double> shifted{0, 0, 1, 2, 1, 0, 0}, base{0, 1, 2, 1, 0, 0, 0};
  CHECK(dtw_distance(shifted, base, {0}) > 0.0);
  CHECK(dtw_distance(shifted, base, {1}) == doctest::Approx(0.0));
  CHECK(code_of([&] { dtw_distance(std::vector<double>{}, b, {0}); }) == ErrorCode::EmptySequence);
  CHECK(code_of([&] { dtw_distance(std::vector<double>{1, 2, 3}, b, {0}); }) == ErrorCode::BandInfeasible);
  CHECK_NOTHROW(dtw_distance(std::vector<double>{1, 2, 3}, b, {1}));
}

TEST_CASE("dtw_distance equals the full-matrix oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(1, 32);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_seq(rng, len(rng));
    const auto b = random_seq(rng, len(rng));
    const std::size_t gap = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
    for (std::size_t r : {std::size_t{0}, std::size_t{4}, std::size_t{9}, WarpParams::kUnconstrained}) {
      if (r < gap) continue;
      const double want = oracle::dtw_full_matrix(a, b, r);
      CHECK(std::abs(dtw_distance(a, b, {r}) - want) <= 1e-9);
    }
  }
}

TEST_CASE("dtw metric properties") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_seq(rng, 24), b = random_seq(rng, 24);
    const double d0 = dtw_distance(a, b, {0});
    CHECK(d0 == doctest::Approx(oracle::euclidean(a, b)).epsilon(1e-12));
    CHECK(dtw_distance(a, b, {3}) == dtw_distance(b, a, {3}));
    CHECK(dtw_distance(a, a, {3}) == 0.0);
    double prev = d0;
    for (std::size_t r = 1; r <= 24; ++r) {
      const double d = dtw_distance(a, b, {r});
      CHECK(d <= prev + 1e-12);
      CHECK(d >= 0.0);
      prev = d;
    }
  }
}

TEST_CASE("nearest neighbour rules") {
  TrainingCorpus corpus;
  corpus.entries = {{{0, 1, 2, 1, 0}, Truth::FalseAlarm, "II", Arrhythmia::VTach, "f"},
                    {{0, -1, -2, -1, 0}, Truth::TrueAlarm, "II", Arrhythmia::VTach, "t"}};
  const std::vector<double> t{0, -1, -2, -1, 0};
  CHECK(nn1_label(t, corpus, {0}) == Truth::TrueAlarm);
  CHECK(nearest_neighbor(t, corpus, {0}).index == 1);

  TrainingCorpus lone;
  lone.entries = {corpus.entries[0]};
  CHECK(nn1_label(t, lone, {0}) == Truth::FalseAlarm);

  TrainingCorpus tie;
  tie.entries = {{{1, 1, 1}, Truth::TrueAlarm, "II", Arrhythmia::VTach, "a"},
                 {{-1, -1, -1}, Truth::FalseAlarm, "II", Arrhythmia::VTach, "b"}};
  CHECK(nn1_label(std::vector<double>{0, 0, 0}, tie, {0}) == Truth::TrueAlarm);
  std::swap(tie.entries[0], tie.entries[1]);
  CHECK(nn1_label(std::vector<double>{0, 0, 0}, tie, {0}) == Truth::FalseAlarm);

  CHECK(code_of([&] { nn1_label(t, TrainingCorpus{}, {0}); }) == ErrorCode::EmptyCorpus);
  CHECK(corpus.filtered("V", Arrhythmia::VTach).empty());
  CHECK(corpus.filtered("II", Arrhythmia::VTach).entries.size() == 2);
}

TEST_CASE("full-signal classification") {
  synth::SynthSpec spec;
  spec.scenario = synth::Scenario::VTach;
  spec.alarm_tag = Arrhythmia::VTach;
  spec.event_rate = 160.0;
  spec.heart_rate = 70.0;
  spec.duration_s = 40.0;
  const auto vt = synth::generate(spec);
  spec.scenario = synth::Scenario::Sinus;
  spec.seed = 2;
  auto sinus = synth::generate(spec);
  sinus.record.alarm.truth = Truth::FalseAlarm;
  auto vt_rec = vt.record;
  vt_rec.alarm.truth = Truth::TrueAlarm;

  const auto sig = alarm_signal(vt_rec);
  CHECK(sig.size() == 1250);

  TrainingCorpus corpus;
  corpus.entries = {make_corpus_entry(sinus.record), make_corpus_entry(vt_rec)};
  const auto v = classify_full_signal(vt_rec, corpus, {250});
  CHECK(v.decision == Truth::TrueAlarm);
  CHECK(classify_full_signal(sinus.record, corpus, {0}).decision == Truth::FalseAlarm);

  auto no_ii = vt_rec;
  no_ii.channels[0].name = "III";
  CHECK(code_of([&] { classify_full_signal(no_ii, corpus, {0}); }) == ErrorCode::MissingLead);
  auto unlabelled = vt_rec;
  unlabelled.alarm.truth.reset();
  CHECK(code_of([&] { make_corpus_entry(unlabelled); }) == ErrorCode::UnknownTruth);

  oracle::TempDir dir("corpus");
  save_corpus(corpus, dir / "c.bin");
  const auto back = load_corpus(dir / "c.bin", "II", Arrhythmia::VTach);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].label == Truth::TrueAlarm);
  CHECK(back.entries[1].sequence == corpus.entries[1].sequence);
}
