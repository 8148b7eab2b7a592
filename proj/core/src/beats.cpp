#include "sentinel/beats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "sentinel/dsp.hpp"
#include "sentinel/error.hpp"
#include "sentinel/signal_quality.hpp"

namespace sentinel {
namespace {

std::size_t seconds_to_samples(double seconds, double sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

void require_length(std::size_t n, double sample_rate, double seconds, const char* what) {
  if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (n < seconds_to_samples(seconds, sample_rate)) {
    throw Error(ErrorCode::WindowTooShort, std::string(what) + " needs at least " + std::to_string(seconds) + " s");
  }
}

// Local maxima that dominate a +-radius neighbourhood; ties go to the
// earliest sample. Values must be strictly positive.
std::vector<std::size_t> dominant_peaks(std::span<const double> v, std::size_t radius) {
  std::vector<std::size_t> peaks;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(v[i] > 0.0)) continue;
    if (i > 0 && v[i - 1] >= v[i]) continue;
    if (i + 1 < n && v[i + 1] > v[i]) continue;
    const std::size_t lo = i > radius ? i - radius : 0;
    const std::size_t hi = std::min(n - 1, i + radius);
    bool best = true;
    for (std::size_t j = lo; j <= hi && best; ++j) {
      if (j < i ? v[j] >= v[i] : v[j] > v[i]) best = false;
    }
    if (best) peaks.push_back(i);
  }
  return peaks;
}

std::vector<double> five_point_derivative(std::span<const double> x, double sample_rate) {
  std::vector<double> d(x.size(), 0.0);
  for (std::size_t i = 2; i + 2 < x.size(); ++i) {
    d[i] = (2.0 * x[i + 1] + x[i + 2] - x[i - 2] - 2.0 * x[i - 1]) * sample_rate / 8.0;
  }
  return d;
}

double max_abs(std::span<const double> x, std::size_t center, std::size_t half) {
  const std::size_t lo = center > half ? center - half : 0;
  const std::size_t hi = std::min(x.size(), center + half + 1);
  double m = 0.0;
  for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

}  // namespace

std::string_view to_string(BeatLabel label) noexcept {
  switch (label) {
    case BeatLabel::Normal: return "N";
    case BeatLabel::Ventricular: return "V";
    case BeatLabel::Unknown: return "?";
  }
  return "?";
}

BeatAnnotation detect_qrs(std::span<const double> ecg, double fs) {
  require_length(ecg.size(), fs, 2.0, "QRS detection");
  static thread_local std::optional<std::pair<double, dsp::Sos>> cached;
  if (!cached || cached->first != fs) cached.emplace(fs, dsp::butter_bandpass(2, 5.0, 15.0, fs));

  const auto filled = dsp::fill_missing(ecg);
  const auto band = dsp::filtfilt(cached->second, filled);
  const auto slope = five_point_derivative(band, fs);
  std::vector<double> energy(slope.size());
  std::transform(slope.begin(), slope.end(), energy.begin(), [](double v) { return v * v; });
  const auto integrated = dsp::moving_average(energy, std::max<std::size_t>(1, seconds_to_samples(0.15, fs)));

  const std::size_t refractory = seconds_to_samples(kQrsRefractorySeconds, fs);
  const std::size_t twave_window = seconds_to_samples(0.36, fs);
  const std::size_t slope_half = seconds_to_samples(0.075, fs);
  const auto candidates = dominant_peaks(integrated, refractory);

  BeatAnnotation out;
  if (candidates.empty()) return out;

  const std::size_t learn = std::min(integrated.size(), seconds_to_samples(4.0, fs));
  double spki = 0.0;
  for (auto c : candidates) {
    if (c < learn) spki = std::max(spki, integrated[c]);
  }
  if (spki == 0.0) spki = integrated[candidates.front()];
  double npki = 0.5 * dsp::mean(std::span(integrated).first(learn));
  npki = std::min(npki, 0.5 * spki);

  std::vector<std::size_t>& beats = out.indices;
  std::vector<double> beat_slopes;
  std::vector<std::size_t> noise_since_last;  // candidate ordinals rejected since the last beat

  auto threshold = [&] { return npki + 0.25 * (spki - npki); };
  auto mean_rr = [&]() -> double {
    if (beats.size() < 2) return 0.0;
    const std::size_t m = std::min<std::size_t>(8, beats.size() - 1);
    return static_cast<double>(beats.back() - beats[beats.size() - 1 - m]) / static_cast<double>(m);
  };
  auto accept = [&](std::size_t idx, double weight) {
    beats.push_back(idx);
    beat_slopes.push_back(max_abs(slope, idx, slope_half));
    spki = weight * integrated[idx] + (1.0 - weight) * spki;
    noise_since_last.clear();
  };

  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const std::size_t idx = candidates[k];
    const double rr = mean_rr();
    // Search-back for a missed beat once the gap exceeds 1.66 mean RR.
    if (rr > 0.0 && static_cast<double>(idx - beats.back()) > 1.66 * rr) {
      const double thr2 = 0.5 * threshold();
      std::optional<std::size_t> best;
      for (auto ord : noise_since_last) {
        const std::size_t c = candidates[ord];
        if (c < beats.back() + refractory || c + refractory > idx) continue;
        if (integrated[c] > thr2 && (!best || integrated[c] > integrated[*best])) best = c;
      }
      if (best) accept(*best, 0.25);
    }

    const double v = integrated[idx];
    const bool spaced = beats.empty() || idx >= beats.back() + refractory;
    bool is_beat = spaced && v > threshold();
    if (is_beat && !beats.empty() && idx - beats.back() < twave_window) {
      // Low-slope complex shortly after a beat: treat as a T wave.
      if (max_abs(slope, idx, slope_half) < 0.5 * beat_slopes.back()) is_beat = false;
    }
    if (is_beat) {
      accept(idx, 0.125);
    } else {
      npki = 0.125 * v + 0.875 * npki;
      if (!beats.empty()) noise_since_last.push_back(k);
    }
  }
  return out;
}

BeatAnnotation detect_pulses(std::span<const double> pressure, double fs) {
  require_length(pressure.size(), fs, 2.0, "pulse detection");
  static thread_local std::optional<std::pair<double, dsp::Sos>> cached;
  if (!cached || cached->first != fs) cached.emplace(fs, dsp::butter_lowpass(2, std::min(10.0, 0.45 * fs), fs));

  const auto filled = dsp::fill_missing(pressure);
  const auto smooth = dsp::filtfilt(cached->second, filled);
  const std::size_t n = smooth.size();
  const std::size_t w = std::max<std::size_t>(1, seconds_to_samples(0.128, fs));

  std::vector<double> ssf(n, 0.0);
  double running = 0.0;
  std::vector<double> rise(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    rise[i] = std::max(0.0, smooth[i] - smooth[i - 1]);
    running += rise[i];
    if (i >= w) running -= rise[i - w];
    ssf[i] = running;
  }
  // Rounding residue from filtering a constant must not look like a pulse.
  double scale = 0.0;
  for (double v : filled) scale = std::max(scale, std::abs(v));
  const double floor = 1e-9 * std::max(1.0, scale);
  for (auto& v : ssf) {
    if (v < floor) v = 0.0;
  }

  const std::size_t refractory = seconds_to_samples(kPulseRefractorySeconds, fs);
  const auto candidates = dominant_peaks(ssf, refractory);
  BeatAnnotation out;
  if (candidates.empty()) return out;

  const std::size_t learn = std::min(n, seconds_to_samples(4.0, fs));
  double spk = 0.0;
  for (auto c : candidates) {
    if (c < learn) spk = std::max(spk, ssf[c]);
  }
  if (spk == 0.0) spk = ssf[candidates.front()];

  for (auto peak : candidates) {
    const double v = ssf[peak];
    if (v <= 0.4 * spk) continue;
    std::size_t onset = peak;
    while (onset > 0 && ssf[onset - 1] >= 0.5 * v) --onset;
    if (!out.indices.empty() && onset < out.indices.back() + refractory) continue;
    out.indices.push_back(onset);
    spk = 0.125 * v + 0.875 * spk;
  }
  return out;
}

BeatAnnotation parse_annotations(std::string_view text, std::size_t record_length) {
  BeatAnnotation ann;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool any_label = false;
  std::vector<std::optional<BeatLabel>> labels;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string idx_text, label_text, extra;
    if (!(fields >> idx_text)) continue;
    fields >> label_text >> extra;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (!extra.empty()) throw Error(ErrorCode::MalformedAnnotation, where + "too many columns");
    std::size_t idx = 0;
    auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
    if (ec != std::errc{} || ptr != idx_text.data() + idx_text.size()) {
      throw Error(ErrorCode::MalformedAnnotation, where + "'" + idx_text + "' is not a sample index");
    }
    if (!ann.indices.empty() && idx <= ann.indices.back()) {
      throw Error(ErrorCode::MalformedAnnotation, where + "indices must be strictly increasing");
    }
    if (idx >= record_length) {
      throw Error(ErrorCode::IndexOutOfBounds,
                  where + std::to_string(idx) + " beyond record length " + std::to_string(record_length));
    }
    ann.indices.push_back(idx);
    if (label_text.empty()) {
      labels.emplace_back(std::nullopt);
    } else if (label_text == "N" || label_text == "n") {
      labels.emplace_back(BeatLabel::Normal);
      any_label = true;
    } else if (label_text == "V" || label_text == "v") {
      labels.emplace_back(BeatLabel::Ventricular);
      any_label = true;
    } else {
      throw Error(ErrorCode::MalformedAnnotation, where + "label must be N or V");
    }
  }
  if (any_label) {
    for (const auto& l : labels) ann.labels.push_back(l.value_or(BeatLabel::Unknown));
  }
  return ann;
}

BeatAnnotation import_annotations(const std::filesystem::path& path, std::size_t record_length) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open annotation file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str(), record_length);
}

std::vector<double> window_heart_rate(std::span<const std::size_t> indices, double fs, std::size_t k) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "heart-rate windows need k >= 2");
  if (indices.size() < k) {
    throw Error(ErrorCode::TooFewBeats,
                "need " + std::to_string(k) + " beats, have " + std::to_string(indices.size()));
  }
  std::vector<double> rates;
  rates.reserve(indices.size() - k + 1);
  for (std::size_t j = 0; j + k <= indices.size(); ++j) {
    const double span = static_cast<double>(indices[j + k - 1] - indices[j]) / fs;
    rates.push_back(60.0 * static_cast<double>(k - 1) / span);
  }
  return rates;
}

std::vector<BeatSegment> beat_segments(std::span<const std::size_t> idx) {
  if (idx.size() < 3) throw Error(ErrorCode::TooFewBeats, "beat segmentation needs at least 3 beats");
  std::vector<BeatSegment> out;
  out.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double before = static_cast<double>(i == 0 ? idx[1] - idx[0] : idx[i] - idx[i - 1]);
    const double after = static_cast<double>(i + 1 == idx.size() ? idx[i] - idx[i - 1] : idx[i + 1] - idx[i]);
    const auto lead = static_cast<std::size_t>(std::llround(before / 3.0));
    const auto tail = static_cast<std::size_t>(std::llround(2.0 * after / 3.0));
    out.push_back({idx[i], idx[i] > lead ? idx[i] - lead : 0, idx[i] + tail});
  }
  return out;
}

BeatLabel classify_beat_spectral(std::span<const double> beat, double fs) {
  require_length(beat.size(), fs, 0.2, "spectral beat classification");
  const auto filled = dsp::fill_missing(beat);
  const Psd psd = periodogram(filled, fs, 1024);
  const double nyquist = fs / 2.0;
  const double low = band_power(psd, 0.5, std::min(10.0, nyquist));
  const double high = nyquist > 10.0 ? band_power(psd, 10.0, std::min(30.0, nyquist)) : 0.0;
  return low > high ? BeatLabel::Ventricular : BeatLabel::Normal;
}

std::vector<BeatLabel> label_beats_spectral(std::span<const double> ecg, double fs,
                                            std::span<const std::size_t> indices) {
  const std::size_t half = seconds_to_samples(kSpectralBeatHalfWidth, fs);
  const std::size_t width = 2 * half;
  std::vector<BeatLabel> labels;
  labels.reserve(indices.size());
  for (auto idx : indices) {
    if (ecg.size() < width || width < seconds_to_samples(0.2, fs)) {
      labels.push_back(BeatLabel::Unknown);
      continue;
    }
    std::size_t start = idx > half ? idx - half : 0;
    start = std::min(start, ecg.size() - width);
    labels.push_back(classify_beat_spectral(ecg.subspan(start, width), fs));
  }
  return labels;
}

}  // namespace sentinel
