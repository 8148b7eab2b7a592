#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel {

enum class ChannelKind { ECG, ABP, PPG, RESP, OTHER };

enum class Arrhythmia { Asystole, Bradycardia, Tachycardia, VTach, VFib };

enum class Truth { TrueAlarm, FalseAlarm };

inline constexpr Arrhythmia kAllArrhythmias[] = {Arrhythmia::Asystole, Arrhythmia::Bradycardia,
                                                 Arrhythmia::Tachycardia, Arrhythmia::VTach,
                                                 Arrhythmia::VFib};

std::string_view to_string(ChannelKind kind) noexcept;
std::string_view to_string(Arrhythmia arrhythmia) noexcept;
std::string_view to_string(Truth truth) noexcept;

/// Accepts canonical names plus the aliases seen in challenge headers
/// ("Ventricular_Tachycardia", "Extreme Bradycardia", ...). Case-insensitive.
std::optional<Arrhythmia> parse_arrhythmia(std::string_view text);

/// Channel kind from its label: ABP/ART, PLETH/PPG, RESP, standard ECG leads.
ChannelKind infer_channel_kind(std::string_view name);

struct ChannelMeta {
  std::string name;
  ChannelKind kind = ChannelKind::OTHER;
  std::string units;
  double gain = 1.0;  ///< counts per analog unit
  int baseline = 0;   ///< count offset
};

struct AlarmMeta {
  Arrhythmia arrhythmia = Arrhythmia::Asystole;
  std::optional<Truth> truth;
  std::size_t alarm_index = 0;
};

/// Multichannel waveform in analog units. Missing samples are NaN.
struct Record {
  std::string name;
  std::vector<ChannelMeta> channels;
  double sample_rate = 0.0;
  std::vector<std::vector<double>> samples;  ///< one sequence per channel
  AlarmMeta alarm;

  std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }
  std::span<const double> channel(std::size_t i) const { return samples.at(i); }

  /// Index of the first channel named `name` (exact match).
  std::optional<std::size_t> find_channel(std::string_view name) const;

  /// Throws InvalidArgument when channel lengths differ, the record is empty,
  /// the rate is not positive, or the alarm index is out of range.
  void validate() const;
};

struct HeaderInfo {
  std::string record_name;
  std::vector<ChannelMeta> channels;
  std::vector<std::string> sample_files;  ///< per channel, as written
  std::size_t byte_offset = 0;
  double sample_rate = 0.0;
  std::size_t n_samples = 0;
  AlarmMeta alarm;
  bool alarm_index_explicit = false;
};

/// Parses the text header. Signal lines are either the compact form
/// "file 16 gain baseline units name" or the WFDB form
/// "file 16[+offset] gain[(baseline)][/units] [adcres adczero initval checksum blocksize] name".
HeaderInfo parse_header(std::string_view text);

/// Count decoding: -32768 is the missing-sample sentinel.
inline constexpr std::int16_t kMissingCount = -32768;
double count_to_analog(std::int16_t count, double gain, int baseline);
std::int16_t analog_to_count(double value, double gain, int baseline);

/// Little-endian 16-bit interleaved frames.
std::vector<std::int16_t> decode_frames(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_frames(std::span<const std::int16_t> counts);

/// Loads "<name>.hea" and its companion sample file.
Record load_record(const std::filesystem::path& header_path);

/// Writes header + sample file next to each other; returns the header path.
std::filesystem::path write_record(const Record& record, const std::filesystem::path& directory);

/// 250 Hz -> 125 Hz: zero-phase 4th-order Butterworth low-pass at 50 Hz,
/// then keep even-indexed samples. NaN positions survive decimation.
Record resample_half(const Record& record);

/// Sub-record covering [alarm_index - seconds*rate, alarm_index).
Record pre_alarm_window(const Record& record, double seconds);

struct ManifestEntry {
  std::filesystem::path record;  ///< header path (resolved against the manifest's directory)
  Arrhythmia arrhythmia = Arrhythmia::Asystole;
  std::optional<Truth> truth;  ///< nullopt = "unknown"
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

/// CSV with header "record,arrhythmia,label"; label in {true,false,unknown}.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Builds a manifest from every *.hea file in `directory`, using the
/// arrhythmia and truth comments of each header. Sorted by file name.
Manifest scan_header_directory(const std::filesystem::path& directory);

}  // namespace sentinel
