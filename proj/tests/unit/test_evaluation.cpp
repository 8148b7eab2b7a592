#include <doctest.h>

#include <cstdlib>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "sentinel/dtw.hpp"
#include "sentinel/error.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/synthkit.hpp"

using namespace sentinel;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

RecordResult result(Arrhythmia a, Truth truth, Truth pred, double ms = 1.0) {
  RecordResult r;
  r.arrhythmia = a;
  r.truth = truth;
  r.prediction = pred;
  r.latency_ms = ms;
  return r;
}

}  // namespace

TEST_CASE("accumulate") {
  const std::vector<Truth> preds{Truth::TrueAlarm, Truth::FalseAlarm};
  const std::vector<std::optional<Truth>> truths{Truth::TrueAlarm, Truth::TrueAlarm};
  CHECK(accumulate(preds, truths) == ConfusionCounts{1, 0, 0, 1});
  CHECK(accumulate({}, {}) == ConfusionCounts{});
  const std::vector<Truth> one{Truth::TrueAlarm};
  const std::vector<std::optional<Truth>> unknown{std::nullopt};
  CHECK(code_of([&] { accumulate(one, unknown); }) == ErrorCode::UnknownTruth);
  CHECK(code_of([&] { accumulate(one, truths); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("challenge score and metric suite") {
  CHECK(challenge_score({1, 1, 1, 1}) == 0.25);
  CHECK(challenge_score({0, 0, 0, 1}) == 0.0);
  CHECK(code_of([] { challenge_score({}); }) == ErrorCode::EmptyCounts);

  const auto m = metric_suite({9, 8, 2, 1});
  CHECK(*m.sensitivity == doctest::Approx(0.9));
  CHECK(*m.specificity == doctest::Approx(0.8));

  const auto perfect = metric_suite({5, 7, 0, 0});
  CHECK(*perfect.sensitivity == 1.0);
  CHECK(*perfect.specificity == 1.0);
  CHECK(*perfect.ppv == 1.0);
  CHECK(*perfect.npv == 1.0);
  CHECK(*perfect.f1 == 1.0);
  CHECK(perfect.challenge_score == 1.0);

  const auto only_false = metric_suite({0, 4, 1, 0});
  CHECK_FALSE(only_false.sensitivity.has_value());
  CHECK(*only_false.ppv == 0.0);
  CHECK_FALSE(only_false.f1.has_value());
  CHECK(*only_false.specificity == doctest::Approx(0.8));

  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> d(1, 400);
  for (int t = 0; t < 100; ++t) {
    const ConfusionCounts c{d(rng), d(rng), d(rng), d(rng)};
    const auto got = metric_suite(c);
    const auto want = oracle::metrics(double(c.tp), double(c.tn), double(c.fp), double(c.fn));
    CHECK(*got.sensitivity == want.sens);
    CHECK(*got.specificity == want.spec);
    CHECK(*got.ppv == want.ppv);
    CHECK(*got.npv == want.npv);
    CHECK(*got.f1 == want.f1);
    CHECK(got.challenge_score == want.score);
  }
}

TEST_CASE("reference asystole and overall rows follow from their counts") {
  // Asystole: 22 true and 100 false alarms; the improved run kept all true ones and dismissed 93.
  const auto asys = metric_suite({22, 93, 7, 0});
  CHECK(*asys.sensitivity == doctest::Approx(1.0));
  CHECK(*asys.specificity == doctest::Approx(0.93).epsilon(0.005));
  CHECK(asys.challenge_score == doctest::Approx(0.943).epsilon(0.005));
  // Overall: 294 true and 456 false alarms.
  const auto all = metric_suite({267, 382, 74, 27});
  CHECK(*all.sensitivity == doctest::Approx(0.908).epsilon(0.002));
  CHECK(*all.specificity == doctest::Approx(0.838).epsilon(0.002));
  CHECK(all.challenge_score == doctest::Approx(0.756).epsilon(0.002));
}

TEST_CASE("per-arrhythmia report") {
  std::vector<RecordResult> one{result(Arrhythmia::VFib, Truth::TrueAlarm, Truth::TrueAlarm),
                                result(Arrhythmia::VFib, Truth::FalseAlarm, Truth::TrueAlarm)};
  const auto r1 = per_arrhythmia_report(one);
  REQUIRE(r1.per_arrhythmia.size() == 1);
  CHECK(r1.overall.counts == r1.per_arrhythmia[0].second.counts);

  auto two = one;
  two.push_back(result(Arrhythmia::Asystole, Truth::FalseAlarm, Truth::FalseAlarm));
  two.push_back(result(Arrhythmia::Asystole, Truth::TrueAlarm, Truth::FalseAlarm));
  const auto r2 = per_arrhythmia_report(two);
  REQUIRE(r2.per_arrhythmia.size() == 2);
  CHECK(r2.per_arrhythmia[0].first == Arrhythmia::Asystole);
  ConfusionCounts sum = r2.per_arrhythmia[0].second.counts;
  sum += r2.per_arrhythmia[1].second.counts;
  CHECK(r2.overall.counts == sum);

  two.push_back(result(Arrhythmia::VTach, Truth::TrueAlarm, Truth::TrueAlarm));
  two.back().truth.reset();
  CHECK(code_of([&] { per_arrhythmia_report(two); }) == ErrorCode::UnknownTruth);
}

TEST_CASE("latency statistics") {
  std::vector<RecordResult> r;
  for (int i = 1; i <= 20; ++i) r.push_back(result(Arrhythmia::VFib, Truth::TrueAlarm, Truth::TrueAlarm, double(i)));
  const auto s = latency_stats(r);
  CHECK(s.mean_ms == doctest::Approx(10.5));
  CHECK(s.max_ms == 20.0);
  CHECK(s.p95_ms >= 19.0);
  CHECK(s.p95_ms <= 20.0);
}

TEST_CASE("random split") {
  const auto s = random_split(750);
  CHECK(s.train.size() == 500);
  CHECK(s.test.size() == 250);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 750);
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  const auto again = random_split(750);
  CHECK(again.train == s.train);
  CHECK(random_split(750, 1).train != s.train);
  CHECK(random_split(10).train.size() == 7);
}

TEST_CASE("split file and manifest filter") {
  oracle::TempDir dir("split");
  const auto m = parse_manifest("record,arrhythmia,label\na.hea,VTach,true\nb.hea,VTach,false\nc.hea,VFib,true\n",
                                dir.path());
  {
    std::ofstream out(dir / "split.csv");
    out << "record,set\na,train\nc,test\n";
  }
  const auto s = load_split(dir / "split.csv", m);
  CHECK(s.train == std::vector<std::size_t>{0});
  CHECK(s.test == std::vector<std::size_t>{2});
  {
    std::ofstream out(dir / "bad.csv");
    out << "record,set\na,holdout\n";
  }
  CHECK(code_of([&] { load_split(dir / "bad.csv", m); }) == ErrorCode::MalformedRow);
  CHECK(filter_manifest(m, Arrhythmia::VTach).entries.size() == 2);
}

TEST_CASE("worker count honours the environment cap") {
  ::setenv("ALARM_SENTINEL_THREADS", "2", 1);
  CHECK(worker_count(8) == 2);
  CHECK(worker_count(1) == 1);
  CHECK(worker_count(0) <= 2);
  ::unsetenv("ALARM_SENTINEL_THREADS");
  CHECK(worker_count(3) == 3);
  CHECK(worker_count(0) >= 1);
}

TEST_CASE("manifest evaluation keeps order and fails safe") {
  oracle::TempDir dir("eval");
  const auto manifest_path = synth::generate_suite(7, dir.path());
  auto m = load_manifest(manifest_path);
  REQUIRE(m.entries.size() == 50);
  m.entries.resize(12);
  ManifestEntry broken;
  broken.record = dir / "missing.hea";
  broken.arrhythmia = Arrhythmia::Bradycardia;
  broken.truth = Truth::FalseAlarm;
  m.entries.push_back(broken);

  EvaluationOptions opt;
  opt.threads = 3;
  const auto r = evaluate_manifest(m, opt);
  REQUIRE(r.size() == 13);
  for (std::size_t i = 0; i < 12; ++i) CHECK(r[i].record == m.entries[i].record.stem().string());
  CHECK(r[12].prediction == Truth::TrueAlarm);
  CHECK_FALSE(r[12].error.empty());

  opt.threads = 1;
  const auto serial = evaluate_manifest(m, opt);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(serial[i].prediction == r[i].prediction);

  const auto corpus = build_corpus(filter_manifest(load_manifest(manifest_path), Arrhythmia::VTach));
  CHECK(corpus.entries.size() == 10);
}
