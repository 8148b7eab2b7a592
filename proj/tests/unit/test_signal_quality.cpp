#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "sentinel/error.hpp"
#include "sentinel/signal_quality.hpp"
#include "sentinel/synthkit.hpp"

using namespace sentinel;

namespace {

std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace

TEST_CASE("out-of-range ABP covers the whole channel") {
  const std::vector<double> abp(2500, 350.0);
  const auto iv = detect_invalid_segments(abp, ChannelKind::ABP, 250.0);
  REQUIRE(iv.size() == 1);
  CHECK(iv[0].start == 0);
  CHECK(iv[0].end == 2500);
  CHECK(iv[0].reason == InvalidReason::OutOfRange);
}

TEST_CASE("missing run is reported exactly") {
  auto ecg = oracle::sine(1.3, 250.0, 2500, 0.5);
  for (std::size_t i = 100; i < 200; ++i) ecg[i] = std::numeric_limits<double>::quiet_NaN();
  const auto iv = detect_invalid_segments(ecg, ChannelKind::ECG, 250.0);
  bool found = false;
  for (const auto& v : iv) {
    if (v.reason == InvalidReason::MissingData) {
      CHECK(v.start == 100);
      CHECK(v.end == 200);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("clean synthetic ECG and ABP have no invalid segments") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.seed = 5;
  const auto s = synth::generate(spec);
  for (std::size_t c = 0; c < s.record.channels.size(); ++c) {
    const auto iv = detect_invalid_segments(s.record.channel(c), s.record.channels[c].kind, 250.0);
    CHECK_MESSAGE(iv.empty(), s.record.channels[c].name);
  }
}

TEST_CASE("invalid intervals are sorted, disjoint and in bounds") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.artifacts = {{"II", synth::Artifact::Kind::Missing, 5.0, 0.0},
                    {"V", synth::Artifact::Kind::NoiseBurst, 10.0, 1.0},
                    {"ABP", synth::Artifact::Kind::FlatLine, 8.0, 0.0}};
  const auto s = synth::generate(spec);
  for (std::size_t c = 0; c < s.record.channels.size(); ++c) {
    const auto iv = detect_invalid_segments(s.record.channel(c), s.record.channels[c].kind, 250.0);
    for (std::size_t i = 0; i < iv.size(); ++i) {
      CHECK(iv[i].start < iv[i].end);
      CHECK(iv[i].end <= s.record.length());
      if (i > 0) CHECK(iv[i - 1].end < iv[i].start);
    }
    if (c < 3) CHECK_FALSE(iv.empty());
  }
}

TEST_CASE("merge_intervals joins touching runs and keeps the specific reason") {
  const auto m = merge_intervals({{10, 20, InvalidReason::SpectralNoise},
                                  {0, 5, InvalidReason::FlatLine},
                                  {20, 30, InvalidReason::OutOfRange},
                                  {40, 50, InvalidReason::MissingData}});
  REQUIRE(m.size() == 3);
  CHECK(m[0] == InvalidInterval{0, 5, InvalidReason::FlatLine});
  CHECK(m[1] == InvalidInterval{10, 30, InvalidReason::OutOfRange});
  CHECK(m[2] == InvalidInterval{40, 50, InvalidReason::MissingData});
}

TEST_CASE("Welch peak sits on the tone") {
  const auto x = oracle::sine(10.0, 250.0, 2500);
  const auto psd = welch_psd(x, 250.0);
  std::size_t best = 0;
  for (std::size_t k = 0; k < psd.density.size(); ++k) {
    if (psd.density[k] > psd.density[best]) best = k;
  }
  CHECK(std::abs(psd.frequencies[best] - 10.0) <= psd.resolution());
  CHECK_THROWS_AS(welch_psd(oracle::sine(10.0, 250.0, 250), 250.0), Error);
}

TEST_CASE("Welch of white noise is flat at 2 sigma^2 / fs") {
  const double fs = 250.0;
  const auto x = oracle::gaussian_noise(250 * 120, 11);
  const auto psd = welch_psd(x, fs);
  const double level = 2.0 / fs;
  std::size_t inside = 0, total = 0;
  double mean = 0.0;
  for (std::size_t k = 0; k < psd.frequencies.size(); ++k) {
    const double f = psd.frequencies[k];
    if (f < 2.0 || f > fs / 2.0 - 2.0) continue;
    ++total;
    mean += psd.density[k];
    if (std::abs(psd.density[k] / level - 1.0) < 0.5) ++inside;
  }
  CHECK(mean / double(total) == doctest::Approx(level).epsilon(0.05));
  CHECK(double(inside) / double(total) >= 0.95);
}

TEST_CASE("band_fraction") {
  const double fs = 250.0;
  CHECK(band_fraction(welch_psd(oracle::sine(10.0, fs, 2500), fs), 5, 15, 5, 40) ==
        doctest::Approx(1.0).epsilon(0.01));
  CHECK(band_fraction(welch_psd(oracle::sine(30.0, fs, 2500), fs), 5, 15, 5, 40) ==
        doctest::Approx(0.0).epsilon(0.01));
  const auto two = add(oracle::sine(7.0, fs, 2500), oracle::sine(30.0, fs, 2500));
  CHECK(std::abs(band_fraction(welch_psd(two, fs), 5, 15, 5, 40) - 0.5) <= 0.05);
  CHECK_THROWS_AS(band_fraction(welch_psd(std::vector<double>(2500, 0.0), fs), 5, 15, 5, 40), Error);
}

TEST_CASE("clean-window metrics") {
  const double fs = 125.0;
  const auto noise = oracle::gaussian_noise(1250, 2015);
  CHECK(std::abs(kurtosis(noise) - 3.0) <= 0.2);
  CHECK(kurtosis(noise) == doctest::Approx(oracle::sample_kurtosis(noise)).epsilon(1e-12));
  CHECK(std::abs(kurtosis(oracle::sine(5.0, fs, 1250)) - 1.5) <= 0.05);
  CHECK(clean_window_metrics(oracle::sine(0.5, fs, 1250), fs).baseline_wander <= 0.05);
  CHECK(clean_window_metrics(oracle::sine(10.0, fs, 1250), fs).power_ratio >= 0.95);
  CHECK_THROWS_AS(kurtosis(std::vector<double>(10, 2.0)), Error);
}

TEST_CASE("is_clean thresholds are inclusive and monotone") {
  CHECK(is_clean({0.9, 0.95, 6.0}));
  CHECK_FALSE(is_clean({0.5, 0.95, 6.0}));
  CHECK(is_clean({0.75, 0.9, 4.0}));
  const double grid[] = {0.0, 0.5, 0.75, 0.8, 0.9, 0.95, 1.0, 3.0, 4.0, 6.0};
  for (double a : grid)
    for (double b : grid)
      for (double c : grid) {
        if (!is_clean({a, b, c})) continue;
        CHECK(is_clean({a + 0.1, b, c}));
        CHECK(is_clean({a, b + 0.1, c}));
        CHECK(is_clean({a, b, c + 1.0}));
      }
}

TEST_CASE("channel_validity") {
  const SampleWindow w{0, 4000};
  CHECK(channel_validity({}, w) == 1.0);
  const std::vector<InvalidInterval> all{{0, 4000, InvalidReason::MissingData}};
  CHECK(channel_validity(all, w) == 0.0);
  const std::vector<InvalidInterval> four_s{{1000, 2000, InvalidReason::FlatLine}};
  CHECK(channel_validity(four_s, w) == doctest::Approx(0.75));
  const std::vector<InvalidInterval> outside{{5000, 6000, InvalidReason::FlatLine}};
  CHECK(channel_validity(outside, w) == 1.0);
}

TEST_CASE("assess_quality weights every channel") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.artifacts = {{"ABP", synth::Artifact::Kind::Missing, 8.0, 0.0}};
  const auto s = synth::generate(spec);
  const SampleWindow w{s.record.length() - 4000, s.record.length()};
  const auto q = assess_quality(s.record, w);
  REQUIRE(q.channels.size() == 4);
  CHECK(q.channels[0].validity_weight == doctest::Approx(1.0));
  CHECK(q.channels[2].validity_weight == doctest::Approx(0.5).epsilon(0.02));
  CHECK(q.clean_metrics.has_value());
}
