#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sentinel {

enum class BeatLabel { Normal, Ventricular, Unknown };

std::string_view to_string(BeatLabel label) noexcept;

/// Beat positions on one channel. `labels` is either empty or parallel to
/// `indices`.
struct BeatAnnotation {
  std::size_t channel = 0;
  std::vector<std::size_t> indices;
  std::vector<BeatLabel> labels;

  bool has_labels() const { return !labels.empty(); }
};

/// [start, end) around one beat.
struct BeatSegment {
  std::size_t beat = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const BeatSegment&) const = default;
};

/// Minimum spacing between accepted QRS complexes.
inline constexpr double kQrsRefractorySeconds = 0.2;
inline constexpr double kPulseRefractorySeconds = 0.3;

/// Offline Pan-Tompkins style detector: 5-15 Hz zero-phase band-pass,
/// five-point derivative, squaring, centered 150 ms integration, adaptive
/// dual thresholds with search-back. Annotations sit on integration peaks.
BeatAnnotation detect_qrs(std::span<const double> ecg, double sample_rate);

/// Pressure/pleth pulse onsets: 10 Hz low-pass, 128 ms slope-sum function,
/// adaptive threshold, 300 ms refractory period.
BeatAnnotation detect_pulses(std::span<const double> pressure, double sample_rate);

/// One decimal sample index per line (ascending), optional N|V second column.
BeatAnnotation parse_annotations(std::string_view text, std::size_t record_length);
BeatAnnotation import_annotations(const std::filesystem::path& path, std::size_t record_length);

/// 60 (k - 1) / span_seconds for every run of k consecutive beats.
std::vector<double> window_heart_rate(std::span<const std::size_t> indices, double sample_rate, std::size_t k_beats);

/// Beat i spans [idx[i] - gap_before/3, idx[i] + 2 gap_after/3). The first
/// beat borrows its following gap for both sides, the last beat its
/// preceding gap. Starts are clamped at zero.
std::vector<BeatSegment> beat_segments(std::span<const std::size_t> indices);

/// Ventricular iff PSD power in 0.5-10 Hz exceeds power in 10-30 Hz.
BeatLabel classify_beat_spectral(std::span<const double> beat, double sample_rate);

/// Half-width of the QRS-centred window handed to classify_beat_spectral.
inline constexpr double kSpectralBeatHalfWidth = 0.1;

/// Labels every annotated beat with classify_beat_spectral on a
/// +-100 ms window around it; near the edges the window slides inward.
std::vector<BeatLabel> label_beats_spectral(std::span<const double> ecg, double sample_rate,
                                            std::span<const std::size_t> indices);

}  // namespace sentinel
