#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/beats.hpp"
#include "sentinel/record_io.hpp"

/// Deterministic synthetic ICU records with known beat times and a verdict
/// fixed by construction. Everything here is test scaffolding; no classifier
/// output feeds back into the expected values.
namespace sentinel::synth {

/// What actually happens in the final seconds of the record.
enum class Scenario { Sinus, Asystole, Bradycardia, Tachycardia, VTach, VFib };

/// Channel corruption injected into the last `seconds` before the alarm.
struct Artifact {
  enum class Kind { NoiseBurst, Dropout, Missing, FlatLine };
  std::string channel;
  Kind kind = Kind::NoiseBurst;
  double seconds = 8.0;
  double amplitude = 1.0;  ///< noise std for NoiseBurst, analog units
};

struct SynthSpec {
  Scenario scenario = Scenario::Sinus;
  Arrhythmia alarm_tag = Arrhythmia::Asystole;  ///< arrhythmia written to the header
  double heart_rate = 80.0;                     ///< sinus rate before (and without) an event, bpm
  double rr_jitter = 0.02;                      ///< uniform relative RR jitter

  double asystole_gap_s = 5.0;  ///< beat-free time before the alarm
  double event_rate = 0.0;      ///< brady/tachy/VT rate, bpm
  double event_seconds = 20.0;  ///< brady/tachy/VF duration before the alarm
  int vt_run_beats = 6;
  double vf_frequency = 5.0;  ///< Hz
  double qrs_width_ms = 140.0;  ///< ventricular QRS width

  double noise_mv = 0.01;        ///< ECG white-noise std
  double baseline_wander_mv = 0.0;  ///< 0.3 Hz sinusoid amplitude on ECG leads
  std::vector<Artifact> artifacts;

  std::uint64_t seed = 1;
  double duration_s = 300.0;
  double sample_rate = 250.0;
  std::vector<std::string> channels = {"II", "V", "ABP", "PLETH"};
  std::string name = "synth";
};

struct SynthRecord {
  Record record;
  std::vector<double> beat_times;  ///< seconds, every beat that was drawn
  std::vector<BeatLabel> beat_labels;
  Truth expected = Truth::FalseAlarm;
};

SynthRecord generate(const SynthSpec& spec);

/// The 50 specs behind generate_suite: 10 per arrhythmia, the first five
/// true events, the last five regular rhythms carrying a false alarm tag.
std::vector<SynthSpec> suite_specs(std::uint64_t seed);

/// Writes all 50 records plus manifest.csv into `directory`; returns the
/// manifest path.
std::filesystem::path generate_suite(std::uint64_t seed, const std::filesystem::path& directory);

/// Narrow (Normal) or wide (Ventricular) single-beat templates sampled at
/// `sample_rate`, each segmented the way beat_segments would cut it. Used as
/// a surrogate for a hand-curated ventricular beat bank.
std::vector<std::vector<double>> surrogate_beats(BeatLabel kind, std::size_t count, std::uint64_t seed,
                                                 double sample_rate = 125.0);

/// Small deterministic generator (splitmix64) with portable uniform and
/// normal draws, so outputs are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  ///< [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

/// ECG templates in mV, time in seconds relative to the R peak.
double normal_beat(double t, double rr);
double ventricular_beat(double t, double qrs_width_s);

}  // namespace sentinel::synth
