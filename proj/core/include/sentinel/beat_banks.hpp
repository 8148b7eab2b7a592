#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sentinel/beats.hpp"
#include "sentinel/dtw.hpp"
#include "sentinel/record_io.hpp"

namespace sentinel {

enum class BankKind { VentricularRepresentative, StandardRepresentative, SelfNonVentricular };

std::string_view to_string(BankKind kind) noexcept;

struct BeatProvenance {
  std::string record;
  std::size_t start = 0;  ///< sample range at the bank rate
  std::size_t end = 0;
};

struct BeatBank {
  BankKind kind = BankKind::SelfNonVentricular;
  std::vector<std::vector<double>> beats;  ///< z-normalized, 125 Hz
  std::vector<BeatProvenance> provenance;

  std::size_t size() const { return beats.size(); }
  bool empty() const { return beats.empty(); }
};

inline constexpr double kBankSampleRate = 125.0;
inline constexpr std::size_t kBankRadius = 125;  // one second at 125 Hz
inline constexpr std::size_t kSelfBankSize = 20;
inline constexpr double kBankSectionSeconds = 10.0;
inline constexpr double kBankMinPreAlarmSeconds = 30.0;
inline constexpr std::size_t kKlBins = 10;
inline constexpr double kKlEpsilon = 1e-9;

/// Band radius used between two beats: kBankRadius, widened to the length
/// difference when needed so the band is always feasible.
WarpParams beat_warp(std::size_t len_a, std::size_t len_b);
double beat_distance(std::span<const double> a, std::span<const double> b);

/// Walks 10 s sections backward from the start of the alarm window
/// (`alarm_window_s` before the alarm). A section contributes its interior
/// beats when it has no invalid samples and passes is_clean. Stops at 20.
/// InsufficientData with under 30 s of pre-alarm signal;
/// InsufficientCleanBeats when fewer than 20 beats are found.
BeatBank extract_self_bank(const Record& record, std::size_t channel, double alarm_window_s = 16.0);

struct NoveltyStats {
  double mu_min = 0.0;
  double sigma_min = 0.0;
  double mu_kl = 0.0;
  double sigma_kl = 0.0;
  std::vector<double> reference_distances;  ///< all pairs i < j, row-major
  std::vector<double> bin_edges;            ///< kKlBins + 1 edges; values past the last go to a tail bin
  std::vector<double> reference_histogram;  ///< smoothed Q over reference_distances
};

/// BankTooSmall below three beats.
NoveltyStats bank_novelty_stats(const BeatBank& bank);

/// Distance-histogram with kKlBins equal bins plus one tail bin; the
/// result sums to 1 (all zeros for empty input).
std::vector<double> distance_histogram(std::span<const double> distances, std::span<const double> edges);
/// Adds `epsilon` to every bin and renormalizes.
std::vector<double> smooth_distribution(std::span<const double> q, double epsilon = kKlEpsilon);
/// sum P log(P / Q), natural log, 0 log 0 = 0. DimensionMismatch,
/// NotNormalized (tolerance 1e-9). Infinite when Q is zero where P is not.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Nearest beat over both banks, ventricular bank first (ties go to it).
BeatLabel classify_beat_vbank(std::span<const double> beat, const BeatBank& ventricular, const BeatBank& standard);
BeatLabel classify_beat_self_min(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats);
double beat_kl(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats);
BeatLabel classify_beat_self_kl(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats);

enum class BankMethod { VentricularBank, SelfMin, SelfKl };

struct BankClassifier {
  BankMethod method = BankMethod::VentricularBank;
  const BeatBank* ventricular = nullptr;  ///< VentricularBank only
  const BeatBank* reference = nullptr;    ///< standard bank, or the self bank
  const NoveltyStats* stats = nullptr;    ///< SelfMin / SelfKl
};

/// Labels each beat (record sample indices on `channel`) by cutting it at
/// 125 Hz with beat_segments and handing it to the chosen classifier.
std::vector<BeatLabel> vt_labels_from_bank(const Record& record, std::size_t channel,
                                           std::span<const std::size_t> beat_indices, const BankClassifier& classifier);

/// Beat file: first line "fs=125 label=V" (or N), then one sample per line.
void write_beat_file(const std::filesystem::path& path, std::span<const double> beat, BeatLabel label,
                     double sample_rate = kBankSampleRate);
struct BeatFile {
  std::vector<double> samples;
  BeatLabel label = BeatLabel::Normal;
  double sample_rate = kBankSampleRate;
};
BeatFile read_beat_file(const std::filesystem::path& path);

struct BankDirectory {
  BeatBank ventricular;
  BeatBank standard;
};
/// Every regular file in the directory (sorted by name) is read as a beat
/// file and z-normalized. IoFailure when the directory cannot be read.
BankDirectory load_bank_directory(const std::filesystem::path& directory);
/// Writes v_000.txt, v_001.txt, ... (n_ for Normal) with the given label,
/// so a ventricular and a standard bank can share one directory.
void write_bank_directory(const BeatBank& bank, const std::filesystem::path& directory, BeatLabel label);

}  // namespace sentinel
