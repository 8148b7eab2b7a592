#include "sentinel/signal_quality.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sentinel/dsp.hpp"
#include "sentinel/error.hpp"

namespace sentinel {
namespace {

constexpr double kFlatVarianceFloor = 1e-6;
constexpr double kFlatSeconds = 2.0;
constexpr double kAbpMax = 300.0;
constexpr double kEcgMaxAbs = 10.0;
constexpr double kNoiseBandEdge = 40.0;
constexpr double kNoiseFraction = 0.5;
constexpr double kEcgStdCeiling = 2.5;
constexpr double kAbpStdCeiling = 50.0;

template <typename Pred>
void collect_runs(std::span<const double> x, InvalidReason reason, Pred bad, std::vector<InvalidInterval>& out) {
  std::size_t i = 0;
  while (i < x.size()) {
    if (!bad(x[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < x.size() && bad(x[i])) ++i;
    out.push_back({start, i, reason});
  }
}

// Turns a per-sample coverage count into intervals.
void coverage_to_runs(const std::vector<int>& diff, InvalidReason reason, std::vector<InvalidInterval>& out) {
  int level = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < diff.size(); ++i) {
    const int next = level + diff[i];
    if (level == 0 && next > 0) start = i;
    if (level > 0 && next == 0) out.push_back({start, i, reason});
    level = next;
  }
  if (level > 0) out.push_back({start, diff.size() - 1, reason});
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n));
  return w;
}

Psd density_from_power(const std::vector<double>& power, std::size_t nfft, double sample_rate, double scale) {
  Psd psd;
  psd.frequencies.resize(power.size());
  psd.density.resize(power.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    psd.frequencies[k] = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
    const bool edge = k == 0 || (nfft % 2 == 0 && k == nfft / 2);
    psd.density[k] = power[k] * scale * (edge ? 1.0 : 2.0);
  }
  return psd;
}

}  // namespace

std::string_view to_string(InvalidReason reason) noexcept {
  switch (reason) {
    case InvalidReason::OutOfRange: return "OutOfRange";
    case InvalidReason::FlatLine: return "FlatLine";
    case InvalidReason::MissingData: return "MissingData";
    case InvalidReason::SpectralNoise: return "SpectralNoise";
    case InvalidReason::ExcessVariance: return "ExcessVariance";
  }
  return "";
}

std::vector<InvalidInterval> merge_intervals(std::vector<InvalidInterval> intervals) {
  std::erase_if(intervals, [](const InvalidInterval& iv) { return iv.end <= iv.start; });
  std::sort(intervals.begin(), intervals.end(), [](const auto& a, const auto& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  std::vector<InvalidInterval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.start <= merged.back().end) {
      auto& last = merged.back();
      last.end = std::max(last.end, iv.end);
      last.reason = std::min(last.reason, iv.reason);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

std::vector<InvalidInterval> detect_invalid_segments(std::span<const double> x, ChannelKind kind,
                                                     double sample_rate) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "channel is empty");
  if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  const std::size_t n = x.size();
  std::vector<InvalidInterval> found;

  collect_runs(x, InvalidReason::MissingData, [](double v) { return std::isnan(v); }, found);
  collect_runs(x, InvalidReason::MissingData, [](double v) { return std::isinf(v); }, found);
  if (kind == ChannelKind::ABP) {
    collect_runs(x, InvalidReason::OutOfRange,
                 [](double v) { return std::isfinite(v) && !(v > 0.0 && v < kAbpMax); }, found);
  } else if (kind == ChannelKind::ECG) {
    collect_runs(x, InvalidReason::OutOfRange, [](double v) { return std::isfinite(v) && std::abs(v) > kEcgMaxAbs; },
                 found);
  }

  const auto w = static_cast<std::size_t>(std::llround(kFlatSeconds * sample_rate));
  if (w >= 2 && n >= w) {
    // Prefix sums over mean-shifted finite samples keep the variance exact
    // enough for a 1e-6 floor on pressure-scale offsets.
    std::vector<double> finite;
    finite.reserve(n);
    for (double v : x) {
      if (std::isfinite(v)) finite.push_back(v);
    }
    const double shift = dsp::mean(finite);
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    std::vector<std::size_t> bad(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = std::isfinite(x[i]);
      const double v = ok ? x[i] - shift : 0.0;
      s1[i + 1] = s1[i] + v;
      s2[i + 1] = s2[i] + v * v;
      bad[i + 1] = bad[i] + (ok ? 0 : 1);
    }
    const double dw = static_cast<double>(w);
    std::vector<int> flat(n + 1, 0), wild(n + 1, 0);
    const double ceiling = kind == ChannelKind::ECG ? kEcgStdCeiling : kind == ChannelKind::ABP ? kAbpStdCeiling : 0.0;
    for (std::size_t s = 0; s + w <= n; ++s) {
      if (bad[s + w] != bad[s]) continue;
      const double m = (s1[s + w] - s1[s]) / dw;
      const double var = std::max(0.0, (s2[s + w] - s2[s]) / dw - m * m);
      if (var < kFlatVarianceFloor) {
        ++flat[s];
        --flat[s + w];
      }
      if (ceiling > 0.0 && std::sqrt(var) > ceiling) {
        ++wild[s];
        --wild[s + w];
      }
    }
    coverage_to_runs(flat, InvalidReason::FlatLine, found);
    coverage_to_runs(wild, InvalidReason::ExcessVariance, found);
  }

  if (kind == ChannelKind::ECG && sample_rate / 2.0 > kNoiseBandEdge && n >= w && w >= 2) {
    const std::size_t step = std::max<std::size_t>(1, w / 2);
    for (std::size_t s = 0; s + w <= n; s += step) {
      const auto seg = x.subspan(s, w);
      if (std::any_of(seg.begin(), seg.end(), [](double v) { return !std::isfinite(v); })) continue;
      if (dsp::variance(seg) < kFlatVarianceFloor) continue;
      const Psd psd = welch_psd(seg, sample_rate, {kFlatSeconds, 0.5});
      const double total = band_power(psd, 0.0, sample_rate / 2.0);
      if (total > 0.0 && band_power(psd, kNoiseBandEdge, sample_rate / 2.0) > kNoiseFraction * total) {
        found.push_back({s, s + w, InvalidReason::SpectralNoise});
      }
    }
  }
  return merge_intervals(std::move(found));
}

Psd welch_psd(std::span<const double> x, double sample_rate, WelchParams params) {
  const auto min_len = static_cast<std::size_t>(std::llround(2.0 * sample_rate));
  if (x.size() < min_len || x.size() < 2) {
    throw Error(ErrorCode::WindowTooShort, "Welch PSD needs at least 2 s of signal");
  }
  std::size_t nseg = static_cast<std::size_t>(std::llround(params.segment_seconds * sample_rate));
  nseg = std::clamp<std::size_t>(nseg, 2, x.size());
  const auto overlap = static_cast<std::size_t>(std::llround(static_cast<double>(nseg) * params.overlap));
  const std::size_t step = std::max<std::size_t>(1, nseg - std::min(overlap, nseg - 1));

  const auto window = hann(nseg);
  double wsum2 = 0.0;
  for (double v : window) wsum2 += v * v;

  std::vector<double> acc(nseg / 2 + 1, 0.0);
  std::vector<double> seg(nseg);
  std::size_t count = 0;
  for (std::size_t s = 0; s + nseg <= x.size(); s += step) {
    const double mu = dsp::mean(x.subspan(s, nseg));
    for (std::size_t i = 0; i < nseg; ++i) seg[i] = (x[s + i] - mu) * window[i];
    const auto power = dsp::power_spectrum(seg, nseg);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += power[k];
    ++count;
  }
  for (auto& v : acc) v /= static_cast<double>(count);
  return density_from_power(acc, nseg, sample_rate, 1.0 / (sample_rate * wsum2));
}

Psd periodogram(std::span<const double> x, double sample_rate, std::size_t min_nfft) {
  if (x.size() < 2) throw Error(ErrorCode::WindowTooShort, "periodogram needs at least 2 samples");
  std::size_t nfft = 1;
  while (nfft < std::max(min_nfft, x.size())) nfft <<= 1;
  const double mu = dsp::mean(x);
  std::vector<double> centered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mu;
  const auto power = dsp::power_spectrum(centered, nfft);
  return density_from_power(power, nfft, sample_rate, 1.0 / (sample_rate * static_cast<double>(x.size())));
}

double band_power(const Psd& psd, double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi)) throw Error(ErrorCode::InvalidArgument, "band needs 0 <= lo < hi");
  const auto& f = psd.frequencies;
  const auto& p = psd.density;
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    const double a = std::max(lo, f[k]);
    const double b = std::min(hi, f[k + 1]);
    if (b <= a) continue;
    const double slope = (p[k + 1] - p[k]) / (f[k + 1] - f[k]);
    const double pa = p[k] + slope * (a - f[k]);
    const double pb = p[k] + slope * (b - f[k]);
    area += 0.5 * (pa + pb) * (b - a);
  }
  return area;
}

double band_fraction(const Psd& psd, double lo, double hi, double lo2, double hi2) {
  const double den = band_power(psd, lo2, hi2);
  if (den == 0.0) throw Error(ErrorCode::ZeroDenominator, "denominator band holds no power");
  return band_power(psd, lo, hi) / den;
}

double kurtosis(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "kurtosis of empty sequence");
  const double mu = dsp::mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - mu) * (v - mu);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(x.size());
  m4 /= static_cast<double>(x.size());
  if (m2 <= 0.0) throw Error(ErrorCode::ZeroVariance, "kurtosis undefined for constant signal");
  return m4 / (m2 * m2);
}

CleanMetrics clean_window_metrics(std::span<const double> ecg, double sample_rate) {
  const auto filled = dsp::fill_missing(ecg);
  CleanMetrics m;
  m.kurtosis = kurtosis(filled);
  const Psd psd = welch_psd(filled, sample_rate);
  m.baseline_wander = 1.0 - band_fraction(psd, 0.0, 1.0, 0.0, 40.0);
  m.power_ratio = band_fraction(psd, 5.0, 15.0, 5.0, 40.0);
  return m;
}

bool is_clean(const CleanMetrics& m, const CleanThresholds& t) {
  if (!std::isfinite(m.baseline_wander) || !std::isfinite(m.power_ratio) || !std::isfinite(m.kurtosis)) {
    return false;
  }
  return m.baseline_wander >= t.baseline_wander_min && m.power_ratio >= t.power_ratio_min &&
         m.kurtosis >= t.kurtosis_min;
}

double channel_validity(std::span<const InvalidInterval> intervals, SampleWindow window) {
  if (window.end <= window.start) throw Error(ErrorCode::InvalidArgument, "empty analysis window");
  std::size_t invalid = 0;
  for (const auto& iv : intervals) {
    const std::size_t a = std::max(iv.start, window.start);
    const std::size_t b = std::min(iv.end, window.end);
    if (b > a) invalid += b - a;
  }
  const double frac = static_cast<double>(invalid) / static_cast<double>(window.length());
  return std::clamp(1.0 - frac, 0.0, 1.0);
}

QualityReport assess_quality(const Record& record, SampleWindow window) {
  if (window.end > record.length() || window.end <= window.start) {
    throw Error(ErrorCode::InvalidArgument, "analysis window outside record");
  }
  QualityReport report;
  report.window = window;
  for (std::size_t c = 0; c < record.channels.size(); ++c) {
    const auto seg = record.channel(c).subspan(window.start, window.length());
    auto local = detect_invalid_segments(seg, record.channels[c].kind, record.sample_rate);
    ChannelQuality q;
    for (auto iv : local) {
      iv.start += window.start;
      iv.end += window.start;
      q.invalid.push_back(iv);
    }
    q.validity_weight = channel_validity(q.invalid, window);
    for (const auto& iv : q.invalid) q.invalid_in_window += std::min(iv.end, window.end) - std::max(iv.start, window.start);
    report.channels.push_back(std::move(q));
  }

  std::optional<std::size_t> ecg = record.find_channel("II");
  if (!ecg) {
    for (std::size_t c = 0; c < record.channels.size() && !ecg; ++c) {
      if (record.channels[c].kind == ChannelKind::ECG) ecg = c;
    }
  }
  const auto ten = static_cast<std::size_t>(std::llround(10.0 * record.sample_rate));
  if (ecg && window.length() >= ten) {
    try {
      report.clean_metrics = clean_window_metrics(record.channel(*ecg).subspan(window.end - ten, ten), record.sample_rate);
    } catch (const Error&) {
      report.clean_metrics.reset();
    }
  }
  return report;
}

}  // namespace sentinel
