#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sentinel/alarm_logic.hpp"
#include "sentinel/beat_banks.hpp"
#include "sentinel/error.hpp"
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

BeatBank bank_from(const std::vector<std::vector<double>>& beats, BankKind kind = BankKind::SelfNonVentricular) {
  BeatBank b;
  b.kind = kind;
  for (const auto& x : beats) b.beats.push_back(znormalize(x));
  return b;
}

std::vector<std::vector<double>> noisy_normals(std::size_t count, unsigned seed) {
  std::vector<std::vector<double>> out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.03);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> x;
    for (int i = -30; i < 60; ++i) x.push_back(synth::normal_beat(double(i) / 125.0, 0.72) + nd(rng));
    out.push_back(x);
  }
  return out;
}

std::size_t longest_v_run(const std::vector<BeatLabel>& labels) {
  std::size_t best = 0, run = 0;
  for (auto l : labels) {
    run = l == BeatLabel::Ventricular ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

synth::SynthRecord long_record(synth::Scenario scenario, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.scenario = scenario;
  spec.alarm_tag = Arrhythmia::VTach;
  spec.heart_rate = 70.0;
  spec.event_rate = 160.0;
  spec.vt_run_beats = 8;
  spec.seed = seed;
  return synth::generate(spec);
}

}  // namespace

TEST_CASE("beat warp widens to keep the band feasible") {
  CHECK(beat_warp(100, 90).radius == kBankRadius);
  CHECK(beat_warp(400, 100).radius == 300);
  const std::vector<double> a(300, 0.0), b(20, 1.0);
  CHECK(beat_distance(a, b) == doctest::Approx(oracle::dtw_full_matrix(a, b, 300)));
}

TEST_CASE("KL divergence") {
  const std::vector<double> p{0.2, 0.3, 0.5};
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(std::abs(kl_divergence(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) - std::log(2.0)) < 1e-12);
  const auto q = smooth_distribution(std::vector<double>{1.0, 0.0});
  const std::vector<double> half{0.5, 0.5};
  CHECK(kl_divergence(half, q) == doctest::Approx(oracle::kl(half, q)).epsilon(1e-12));
  CHECK(kl_divergence(half, q) == doctest::Approx(9.67).epsilon(0.01));
  CHECK(std::isinf(kl_divergence(half, std::vector<double>{1.0, 0.0})));
  CHECK(code_of([] { kl_divergence(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([] { kl_divergence(std::vector<double>{0.7, 0.7}, std::vector<double>{0.5, 0.5}); }) ==
        ErrorCode::NotNormalized);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(11), b(11);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (auto& v : a) v /= sa;
    for (auto& v : b) v /= sb;
    const auto qb = smooth_distribution(b);
    CHECK(kl_divergence(a, qb) >= 0.0);
    CHECK(kl_divergence(a, qb) == doctest::Approx(oracle::kl(a, qb)).epsilon(1e-9));
  }
}

TEST_CASE("distance histogram") {
  std::vector<double> edges;
  for (int i = 0; i <= 10; ++i) edges.push_back(double(i) * 0.15);
  const std::vector<double> d{0.01, 0.2, 0.2, 1.49, 5.0};
  const auto h = distance_histogram(d, edges);
  REQUIRE(h.size() == kKlBins + 1);
  CHECK(h[0] == doctest::Approx(0.2));
  CHECK(h[1] == doctest::Approx(0.4));
  CHECK(h[9] == doctest::Approx(0.2));
  CHECK(h[10] == doctest::Approx(0.2));
  CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(1.0));
  const auto s = smooth_distribution(h);
  CHECK(std::accumulate(s.begin(), s.end(), 0.0) == doctest::Approx(1.0));
  CHECK(*std::min_element(s.begin(), s.end()) > 0.0);
}

TEST_CASE("novelty statistics") {
  const auto same = noisy_normals(1, 1);
  const auto identical = bank_from(std::vector<std::vector<double>>(20, same[0]));
  const auto si = bank_novelty_stats(identical);
  CHECK(si.mu_min == 0.0);
  CHECK(si.sigma_min == 0.0);
  CHECK(si.reference_distances.size() == 190);

  const auto bank = bank_from(noisy_normals(20, 2));
  const auto s = bank_novelty_stats(bank);
  CHECK(s.mu_min > 0.0);
  CHECK(s.sigma_min > 0.0);
  CHECK(s.bin_edges.size() == kKlBins + 1);
  CHECK(s.reference_histogram.size() == kKlBins + 1);

  // Oracle for the min-distance statistics.
  std::vector<double> mins;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double m = INFINITY;
    for (std::size_t j = 0; j < bank.size(); ++j) {
      if (i != j) m = std::min(m, oracle::dtw_full_matrix(bank.beats[i], bank.beats[j], kBankRadius));
    }
    mins.push_back(m);
  }
  const double mu = std::accumulate(mins.begin(), mins.end(), 0.0) / double(mins.size());
  double var = 0.0;
  for (double m : mins) var += (m - mu) * (m - mu);
  CHECK(s.mu_min == doctest::Approx(mu).epsilon(1e-9));
  CHECK(s.sigma_min == doctest::Approx(std::sqrt(var / double(mins.size()))).epsilon(1e-9));

  CHECK(code_of([&] { bank_novelty_stats(bank_from(noisy_normals(2, 3))); }) == ErrorCode::BankTooSmall);
}

TEST_CASE("self-min classification") {
  const auto bank = bank_from(noisy_normals(20, 4));
  const auto stats = bank_novelty_stats(bank);
  CHECK(classify_beat_self_min(bank.beats[3], bank, stats) == BeatLabel::Normal);
  std::vector<double> inverted = bank.beats[3];
  for (auto& v : inverted) v = -v;
  CHECK(classify_beat_self_min(inverted, bank, stats) == BeatLabel::Ventricular);

  const auto same = noisy_normals(1, 5)[0];
  const auto flat_bank = bank_from(std::vector<std::vector<double>>(20, same));
  const auto flat_stats = bank_novelty_stats(flat_bank);
  auto nudged = flat_bank.beats[0];
  nudged[10] += 1e-3;
  CHECK(classify_beat_self_min(nudged, flat_bank, flat_stats) == BeatLabel::Ventricular);
  CHECK(classify_beat_self_min(flat_bank.beats[0], flat_bank, flat_stats) == BeatLabel::Normal);

  // Monotone: scaling a novel beat away from the bank keeps it Ventricular.
  auto far = bank.beats[0];
  for (double shift : {0.5, 1.0, 2.0, 4.0}) {
    for (std::size_t i = 0; i < far.size(); ++i) far[i] = bank.beats[0][i] + shift * std::sin(double(i));
    const bool v = classify_beat_self_min(far, bank, stats) == BeatLabel::Ventricular;
    if (shift >= 1.0) CHECK(v);
  }
}

TEST_CASE("self-KL classification") {
  const auto bank = bank_from(noisy_normals(20, 6));
  const auto stats = bank_novelty_stats(bank);
  // A member scored against the other nineteen, as in the leave-one-out baseline.
  for (std::size_t b = 0; b < bank.size(); b += 5) {
    BeatBank others = bank;
    others.beats.erase(others.beats.begin() + std::ptrdiff_t(b));
    const double k_member = beat_kl(bank.beats[b], others, stats);
    CHECK(std::abs(k_member - stats.mu_kl) <= 3.0 * stats.sigma_kl + 1e-9);
  }
  std::size_t normal = 0;
  for (std::size_t b = 0; b < bank.size(); ++b) {
    BeatBank others = bank;
    others.beats.erase(others.beats.begin() + std::ptrdiff_t(b));
    normal += classify_beat_self_kl(bank.beats[b], others, stats) == BeatLabel::Normal;
  }
  CHECK(normal >= bank.size() / 2);

  std::vector<double> wide;
  for (int i = -30; i < 60; ++i) wide.push_back(-synth::ventricular_beat(double(i) / 125.0, 0.16));
  const auto wz = znormalize(wide);
  for (const auto& b : bank.beats) CHECK(beat_distance(wz, b) > stats.bin_edges.back());
  CHECK(classify_beat_self_kl(wz, bank, stats) == BeatLabel::Ventricular);

  const auto same = noisy_normals(1, 7)[0];
  const auto flat_bank = bank_from(std::vector<std::vector<double>>(20, same));
  const auto flat_stats = bank_novelty_stats(flat_bank);
  auto nudged = flat_bank.beats[0];
  nudged[20] += 0.05;
  CHECK(classify_beat_self_kl(nudged, flat_bank, flat_stats) == BeatLabel::Ventricular);
}

TEST_CASE("ventricular-bank classification") {
  const auto vb = bank_from(synth::surrogate_beats(BeatLabel::Ventricular, 20, 1), BankKind::VentricularRepresentative);
  const auto nb = bank_from(synth::surrogate_beats(BeatLabel::Normal, 20, 2), BankKind::StandardRepresentative);
  CHECK(classify_beat_vbank(vb.beats[5], vb, nb) == BeatLabel::Ventricular);
  CHECK(classify_beat_vbank(nb.beats[5], vb, nb) == BeatLabel::Normal);
  const auto fresh_v = znormalize(synth::surrogate_beats(BeatLabel::Ventricular, 1, 77)[0]);
  const auto fresh_n = znormalize(synth::surrogate_beats(BeatLabel::Normal, 1, 78)[0]);
  CHECK(classify_beat_vbank(fresh_v, vb, nb) == BeatLabel::Ventricular);
  CHECK(classify_beat_vbank(fresh_n, vb, nb) == BeatLabel::Normal);
  CHECK(code_of([&] { classify_beat_vbank(fresh_v, BeatBank{}, nb); }) == ErrorCode::EmptyBank);
}

TEST_CASE("self bank extraction") {
  const auto s = long_record(synth::Scenario::Sinus, 3);
  const auto bank = extract_self_bank(s.record, 0);
  CHECK(bank.size() == kSelfBankSize);
  const std::size_t limit = std::size_t((s.record.length() - 16 * 250) / 2);
  for (const auto& p : bank.provenance) CHECK(p.end <= limit);

  synth::SynthSpec spec;
  spec.duration_s = 120.0;
  spec.artifacts = {{"II", synth::Artifact::Kind::NoiseBurst, 120.0, 1.0}};
  const auto noisy = synth::generate(spec);
  CHECK(code_of([&] { extract_self_bank(noisy.record, 0); }) == ErrorCode::InsufficientCleanBeats);

  spec.duration_s = 25.0;
  spec.artifacts.clear();
  const auto short_rec = synth::generate(spec);
  CHECK(code_of([&] { extract_self_bank(short_rec.record, 0); }) == ErrorCode::InsufficientData);
}

TEST_CASE("bank labelling of alarm beats") {
  const TestConfig c;
  const auto vt = long_record(synth::Scenario::VTach, 8);
  const auto a = analyze_alarm(vt.record, c);
  const auto vb = bank_from(synth::surrogate_beats(BeatLabel::Ventricular, 20, 1), BankKind::VentricularRepresentative);
  const auto self = extract_self_bank(vt.record, 0);
  BankClassifier clf{BankMethod::VentricularBank, &vb, &self, nullptr};
  const auto labels = vt_labels_from_bank(vt.record, 0, a.channels[0].beats, clf);
  CHECK(longest_v_run(labels) >= 4);

  const auto sinus = long_record(synth::Scenario::Sinus, 9);
  const auto as = analyze_alarm(sinus.record, c);
  const auto sbank = extract_self_bank(sinus.record, 0);
  const auto stats = bank_novelty_stats(sbank);
  BankClassifier self_min{BankMethod::SelfMin, nullptr, &sbank, &stats};
  const auto sl = vt_labels_from_bank(sinus.record, 0, as.channels[0].beats, self_min);
  CHECK(longest_v_run(sl) < 4);
  CHECK_FALSE(ecg_vt_positive(as.channels[0].beats, sl, 250.0, c));
}

TEST_CASE("beat files and bank directories") {
  oracle::TempDir dir("banks");
  const std::vector<double> beat{0.1, -0.5, 2.0, 0.25};
  write_beat_file(dir / "one.txt", beat, BeatLabel::Ventricular);
  const auto f = read_beat_file(dir / "one.txt");
  CHECK(f.label == BeatLabel::Ventricular);
  CHECK(f.sample_rate == 125.0);
  REQUIRE(f.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(f.samples[i] == doctest::Approx(beat[i]).epsilon(1e-12));

  const auto vb = bank_from(synth::surrogate_beats(BeatLabel::Ventricular, 3, 1));
  const auto nb = bank_from(synth::surrogate_beats(BeatLabel::Normal, 2, 1));
  write_bank_directory(vb, dir / "bank", BeatLabel::Ventricular);
  write_bank_directory(nb, dir / "bank_n", BeatLabel::Normal);
  for (const auto& e : std::filesystem::directory_iterator(dir / "bank_n")) {
    std::filesystem::copy(e.path(), dir / "bank" / ("n_" + e.path().filename().string()));
  }
  const auto loaded = load_bank_directory(dir / "bank");
  CHECK(loaded.ventricular.size() == 3);
  CHECK(loaded.standard.size() == 2);
  CHECK(code_of([&] { load_bank_directory(dir / "missing"); }) == ErrorCode::IoFailure);
}
