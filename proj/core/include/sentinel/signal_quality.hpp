#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sentinel/record_io.hpp"

namespace sentinel {

enum class InvalidReason { OutOfRange, FlatLine, MissingData, SpectralNoise, ExcessVariance };

std::string_view to_string(InvalidReason reason) noexcept;

/// Half-open [start, end) run of unusable samples.
struct InvalidInterval {
  std::size_t start = 0;
  std::size_t end = 0;
  InvalidReason reason = InvalidReason::OutOfRange;

  std::size_t length() const { return end - start; }
  bool operator==(const InvalidInterval&) const = default;
};

/// Sample-index window [start, end).
struct SampleWindow {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
};

/// Marks out-of-range values, missing samples, flat lines, broadband noise
/// and excess variance. Output is sorted, disjoint, and within bounds.
std::vector<InvalidInterval> detect_invalid_segments(std::span<const double> samples, ChannelKind kind,
                                                     double sample_rate);

/// Sorts and merges overlapping or touching intervals. A merged interval
/// keeps the most specific reason (lowest enumerator).
std::vector<InvalidInterval> merge_intervals(std::vector<InvalidInterval> intervals);

struct Psd {
  std::vector<double> frequencies;
  std::vector<double> density;  ///< one-sided, analog units^2 / Hz

  double resolution() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }
};

struct WelchParams {
  double segment_seconds = 4.0;
  double overlap = 0.5;
};

/// Welch estimate: Hann window, mean removed per segment. Windows shorter
/// than 2 s are rejected; windows shorter than a segment use one segment.
Psd welch_psd(std::span<const double> samples, double sample_rate, WelchParams params = {});

/// Single rectangular-window periodogram, zero-padded to at least `min_nfft`.
Psd periodogram(std::span<const double> samples, double sample_rate, std::size_t min_nfft = 1024);

/// Trapezoidal integral of the PSD over [lo, hi] (edges linearly interpolated).
double band_power(const Psd& psd, double lo_hz, double hi_hz);

/// band_power(lo, hi) / band_power(lo2, hi2).
double band_fraction(const Psd& psd, double lo_hz, double hi_hz, double lo2_hz, double hi2_hz);

/// Non-excess kurtosis (1/M) sum ((x - mean)/sigma)^4 with population sigma.
double kurtosis(std::span<const double> x);

struct CleanMetrics {
  double baseline_wander = 0.0;  ///< 1 - P[0,1] / P[0,40]
  double power_ratio = 0.0;      ///< P[5,15] / P[5,40]
  double kurtosis = 0.0;
};

struct CleanThresholds {
  double baseline_wander_min = 0.75;
  double power_ratio_min = 0.9;
  double kurtosis_min = 4.0;
};

CleanMetrics clean_window_metrics(std::span<const double> ecg, double sample_rate);

/// Inclusive thresholds: clean iff every metric >= its minimum.
bool is_clean(const CleanMetrics& metrics, const CleanThresholds& thresholds = {});

/// 1 - (invalid samples inside window) / window length, clamped to [0, 1].
double channel_validity(std::span<const InvalidInterval> intervals, SampleWindow window);

struct ChannelQuality {
  std::vector<InvalidInterval> invalid;
  double validity_weight = 1.0;
  std::size_t invalid_in_window = 0;
};

struct QualityReport {
  SampleWindow window;
  std::vector<ChannelQuality> channels;
  std::optional<CleanMetrics> clean_metrics;  ///< ECG clean metrics over the window's last 10 s
};

/// Runs invalid-segment detection on [window.start - margin, window.end)
/// of every channel and weights each channel over the window.
QualityReport assess_quality(const Record& record, SampleWindow window);

}  // namespace sentinel
