#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "oracles.hpp"
#include "sentinel/error.hpp"
#include "sentinel/synthkit.hpp"

using namespace sentinel;

TEST_CASE("rng is deterministic and well spread") {
  synth::Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  CHECK(a.next() != c.next());
  synth::Rng r(1);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("sinus record by construction") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  const auto s = synth::generate(spec);
  CHECK(s.expected == Truth::FalseAlarm);
  CHECK(s.record.length() == 15000);
  CHECK(s.record.channels.size() == 4);
  CHECK(std::abs(double(s.beat_times.size()) - 80.0) <= 2.0);
  CHECK(std::all_of(s.beat_labels.begin(), s.beat_labels.end(), [](BeatLabel l) { return l == BeatLabel::Normal; }));
  CHECK_NOTHROW(s.record.validate());
}

TEST_CASE("event scenarios by construction") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.scenario = synth::Scenario::Asystole;
  spec.asystole_gap_s = 5.0;
  const auto a = synth::generate(spec);
  CHECK(a.expected == Truth::TrueAlarm);
  CHECK(60.0 - a.beat_times.back() >= 5.0);

  spec.scenario = synth::Scenario::VTach;
  spec.alarm_tag = Arrhythmia::VTach;
  spec.event_rate = 120.0;
  spec.vt_run_beats = 6;
  const auto v = synth::generate(spec);
  CHECK(v.expected == Truth::TrueAlarm);
  REQUIRE(v.beat_labels.size() >= 6);
  CHECK(std::count(v.beat_labels.begin(), v.beat_labels.end(), BeatLabel::Ventricular) == 6);
  CHECK(std::all_of(v.beat_labels.end() - 6, v.beat_labels.end(),
                    [](BeatLabel l) { return l == BeatLabel::Ventricular; }));
  const double rr = v.beat_times.back() - v.beat_times[v.beat_times.size() - 2];
  CHECK(rr == doctest::Approx(0.5).epsilon(spec.rr_jitter));

  synth::SynthSpec bad;
  bad.heart_rate = -1.0;
  CHECK_THROWS_AS(synth::generate(bad), Error);
}

TEST_CASE("artifacts touch only the requested channel and span") {
  synth::SynthSpec spec;
  spec.duration_s = 30.0;
  spec.artifacts = {{"PLETH", synth::Artifact::Kind::Missing, 4.0, 0.0}};
  const auto s = synth::generate(spec);
  const auto& pleth = s.record.samples[3];
  CHECK(std::isnan(pleth.back()));
  CHECK(std::isnan(pleth[pleth.size() - 999]));
  CHECK_FALSE(std::isnan(pleth[pleth.size() - 1001 - 5]));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::none_of(s.record.samples[c].begin(), s.record.samples[c].end(), [](double x) { return std::isnan(x); }));
  }
}

TEST_CASE("suite composition") {
  const auto specs = synth::suite_specs(7);
  REQUIRE(specs.size() == 50);
  std::map<Arrhythmia, int> per;
  int truths = 0;
  for (const auto& sp : specs) {
    ++per[sp.alarm_tag];
    truths += sp.scenario != synth::Scenario::Sinus;
  }
  CHECK(truths == 25);
  for (auto a : kAllArrhythmias) CHECK(per[a] == 10);
  CHECK(specs.front().name == "sim000");
}

TEST_CASE("suite files are deterministic and load back") {
  oracle::TempDir one("suite1"), two("suite2");
  const auto m1 = synth::generate_suite(7, one.path());
  synth::generate_suite(7, two.path());
  const auto manifest = load_manifest(m1);
  REQUIRE(manifest.entries.size() == 50);
  int truths = 0;
  for (const auto& e : manifest.entries) {
    truths += *e.truth == Truth::TrueAlarm;
    const auto name = e.record.filename().string();
    CHECK(oracle::read_bytes(one / name) == oracle::read_bytes(two / name));
    const auto dat = e.record.stem().string() + ".dat";
    CHECK(oracle::read_bytes(one / dat) == oracle::read_bytes(two / dat));
    const auto rec = load_record(e.record);
    CHECK_NOTHROW(rec.validate());
    CHECK(rec.alarm.arrhythmia == e.arrhythmia);
  }
  CHECK(truths == 25);
  CHECK(oracle::read_bytes(one / "manifest.csv").size() > 0);
}

TEST_CASE("surrogate beats") {
  const auto v = synth::surrogate_beats(BeatLabel::Ventricular, 5, 3);
  const auto n = synth::surrogate_beats(BeatLabel::Normal, 5, 3);
  REQUIRE(v.size() == 5);
  REQUIRE(n.size() == 5);
  CHECK(synth::surrogate_beats(BeatLabel::Ventricular, 5, 3) == v);
  for (const auto& b : v) CHECK(b.size() > 30);
}
