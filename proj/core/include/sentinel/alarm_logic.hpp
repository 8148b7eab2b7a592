#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/beats.hpp"
#include "sentinel/record_io.hpp"
#include "sentinel/signal_quality.hpp"
#include "sentinel/verdict.hpp"

namespace sentinel {

struct TrainingCorpus;
struct BeatBank;

struct TestConfig {
  double analysis_window_s = 16.0;
  double asystole_gap_s = 3.0;
  double brady_hr = 45.0;
  std::size_t brady_beats = 4;
  double tachy_hr = 140.0;
  std::size_t tachy_beats = 17;
  double vt_hr = 95.0;
  std::size_t vt_beats = 4;
  double vt_abp_std = 6.0;
  double vf_min_duration_s = 3.0;
  double regular_rr_cv_max = 0.1;
  double regular_rr_min_s = 0.43;
  double regular_rr_max_s = 1.5;
  std::size_t regular_min_beats = 5;
  double detection_lead_in_s = 4.0;  ///< extra signal handed to the detectors before the window
  double dtw_radius = 250.0;         ///< samples at 125 Hz, full-signal method

  /// Throws InvalidArgument unless every field is positive and ranges are ordered.
  void validate() const;
};

/// `key = value` lines, `#` comments. Keys are the TestConfig field names;
/// unknown keys and unparsable values are InvalidArgument.
TestConfig parse_config(std::string_view text, TestConfig base = {});
TestConfig load_config(const std::filesystem::path& path, TestConfig base = {});

enum class Method { Baseline, Improved, DtwFull, DtwVbank, DtwSelfMin, DtwSelfKl };

std::string_view to_string(Method method) noexcept;
std::optional<Method> parse_method(std::string_view text);
bool is_dtw_method(Method method) noexcept;

/// Detector output and quality for one channel over the analysis window.
struct ChannelAnalysis {
  std::size_t channel = 0;
  std::string name;
  ChannelKind kind = ChannelKind::OTHER;
  double validity = 0.0;
  std::size_t invalid_in_window = 0;
  std::vector<InvalidInterval> invalid;
  std::vector<std::size_t> beats;  ///< record sample indices inside the window
  std::vector<BeatLabel> labels;   ///< parallel to beats when known
  bool external = false;           ///< beats came from imported annotations
};

struct AlarmAnalysis {
  SampleWindow window;
  double sample_rate = 0.0;
  std::vector<ChannelAnalysis> channels;
  std::optional<CleanMetrics> clean_metrics;
};

/// [alarm - seconds, alarm) clipped at the record start.
SampleWindow analysis_window(const Record& record, double seconds);

/// Quality assessment plus beat detection (QRS on ECG, pulse onsets on
/// ABP/PPG) for every channel. Imported annotations replace detection on
/// their channel.
AlarmAnalysis analyze_alarm(const Record& record, const TestConfig& config,
                            std::span<const BeatAnnotation> annotations = {});

/// Highest validity among ECG/ABP/PPG channels; ties go to lead II, other
/// ECG, ABP, PPG, then the lower channel index.
std::optional<std::size_t> most_reliable_channel(const AlarmAnalysis& analysis);

/// Channels ordered by the same rule, most reliable first.
std::vector<std::size_t> reliability_order(const AlarmAnalysis& analysis);

struct RegularActivity {
  std::vector<bool> per_channel;  ///< parallel to AlarmAnalysis::channels
  std::vector<double> rr_cv;      ///< NaN where fewer than two beats
  bool overall = false;
};

/// A channel is regular when it has no invalid samples in the window, at
/// least `regular_min_beats` beats, RR coefficient of variation within the
/// limit, every RR inside [regular_rr_min_s, regular_rr_max_s], and no edge
/// gap longer than regular_rr_max_s. Overall regular iff any channel is.
RegularActivity regular_activity(const AlarmAnalysis& analysis, const TestConfig& config);

bool channel_regular(std::span<const std::size_t> beats, SampleWindow window, std::size_t invalid_in_window,
                     double sample_rate, const TestConfig& config);

/// Longest beat-free run inside the window, in samples.
std::size_t longest_beat_free_run(std::span<const std::size_t> beats, SampleWindow window);

/// True iff some asystole_gap_s sub-window contains no beat. Windows
/// shorter than the gap confirm the alarm.
bool test_asystole(std::span<const std::size_t> beats, SampleWindow window, double sample_rate,
                   const TestConfig& config);

/// Beats of the most reliable channel, with its invalid stretches filled
/// from the best other channel that is fully valid there.
std::vector<std::size_t> merged_beat_stream(const AlarmAnalysis& analysis);

/// Min HR over brady_beats windows < brady_hr. Too few beats confirms.
bool test_bradycardia(std::span<const std::size_t> beats, double sample_rate, const TestConfig& config);

/// Max HR over tachy_beats windows > tachy_hr. Too few beats confirms.
bool test_tachycardia(std::span<const std::size_t> beats, double sample_rate, const TestConfig& config);

struct VfibSummary {
  bool positive = false;
  double sustained_s = 0.0;  ///< longest run of oscillatory 2 s spectra
  double dominant_hz = 0.0;  ///< dominant frequency of that run's first window
};

/// Sliding 2 s spectra every 0.25 s. A window is oscillatory when its
/// dominant 0.5-30 Hz frequency lies in 2-8 Hz, at least 60 % of the
/// 0.5-30 Hz power sits within 1 Hz of it, and the variances of its two
/// halves are within a factor of 3. Positive when oscillatory windows span
/// at least vf_min_duration_s.
VfibSummary vfib_summary(std::span<const double> ecg, double sample_rate, const TestConfig& config);
bool test_vfib(std::span<const double> ecg, double sample_rate, const TestConfig& config);

/// Highest window HR over runs of vt_beats consecutive ventricular beats,
/// or nullopt when no such run exists.
std::optional<double> max_ventricular_run_hr(std::span<const std::size_t> beats, std::span<const BeatLabel> labels,
                                             double sample_rate, const TestConfig& config);
bool ecg_vt_positive(std::span<const std::size_t> beats, std::span<const BeatLabel> labels, double sample_rate,
                     const TestConfig& config);
/// ABP standard deviation over finite samples < vt_abp_std.
bool abp_vt_positive(std::span<const double> abp, const TestConfig& config);

/// Improved voting: any positive channel confirms. Baseline voting:
/// confirmation needs every participating channel positive. No channel
/// confirms.
bool vote(const std::vector<bool>& positives, Method method);

/// Optional inputs for specific methods.
struct ClassifierResources {
  std::vector<BeatAnnotation> annotations;
  const TrainingCorpus* corpus = nullptr;    ///< dtw-full
  const BeatBank* ventricular_bank = nullptr;  ///< dtw-vbank
  const BeatBank* standard_bank = nullptr;     ///< dtw-vbank fallback when no self bank
};

/// Validity, regular-activity gate, then the tagged arrhythmia's test.
/// DTW methods are defined for VTach only (UnsupportedMethod otherwise).
Verdict classify_alarm(const Record& record, Method method, const TestConfig& config = {},
                       const ClassifierResources& resources = {});

}  // namespace sentinel
