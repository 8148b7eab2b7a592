#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sentinel/record_io.hpp"
#include "sentinel/verdict.hpp"

namespace sentinel {

/// Sakoe-Chiba band half-width in samples; 0 is lockstep.
struct WarpParams {
  static constexpr std::size_t kUnconstrained = std::numeric_limits<std::size_t>::max();
  std::size_t radius = 0;

  static WarpParams unconstrained() { return {kUnconstrained}; }
};

/// Rate and span of the full-signal comparison.
inline constexpr double kDtwSampleRate = 125.0;
inline constexpr double kDtwSignalSeconds = 10.0;

/// (x - mean) / population std. ZeroVariance for constant input,
/// InsufficientData for fewer than two samples.
std::vector<double> znormalize(std::span<const double> x);

/// Square root of the minimal accumulated squared difference over
/// monotone paths inside the band. Memory is O(band width).
double dtw_distance(std::span<const double> a, std::span<const double> b, WarpParams params);

struct CorpusEntry {
  std::vector<double> sequence;  ///< z-normalized
  Truth label = Truth::FalseAlarm;
  std::string lead;
  Arrhythmia arrhythmia = Arrhythmia::VTach;
  std::string record;
};

struct TrainingCorpus {
  std::vector<CorpusEntry> entries;

  /// Entries of the given lead and arrhythmia, original order kept.
  TrainingCorpus filtered(const std::string& lead, Arrhythmia arrhythmia) const;
  bool empty() const { return entries.empty(); }
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
  Truth label = Truth::FalseAlarm;
};

/// Minimal distance; ties keep the earliest entry. EmptyCorpus when empty.
Neighbor nearest_neighbor(std::span<const double> test, const TrainingCorpus& corpus, WarpParams params);
Truth nn1_label(std::span<const double> test, const TrainingCorpus& corpus, WarpParams params);

/// Last 10 s of `lead` at 125 Hz (250 Hz input is halved), missing samples
/// interpolated, z-normalized. MissingLead, InsufficientData, UnsupportedRate.
std::vector<double> alarm_signal(const Record& record, const std::string& lead = "II");

/// Corpus entry from a labelled record. UnknownTruth when unlabelled.
CorpusEntry make_corpus_entry(const Record& record, const std::string& lead = "II");

/// kNN-1 on the record's alarm signal against corpus entries of the same
/// lead and arrhythmia. EmptyCorpus when none match.
Verdict classify_full_signal(const Record& record, const TrainingCorpus& corpus, WarpParams params,
                             const std::string& lead = "II");

/// Binary little-endian cache: u32 count, then per entry a label byte
/// (1 = true alarm), u32 length and raw doubles. Lead and arrhythmia are
/// not stored; load_corpus stamps them on every entry.
void save_corpus(const TrainingCorpus& corpus, const std::filesystem::path& path);
TrainingCorpus load_corpus(const std::filesystem::path& path, const std::string& lead, Arrhythmia arrhythmia);

}  // namespace sentinel
