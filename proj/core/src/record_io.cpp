#include "sentinel/record_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sentinel/dsp.hpp"
#include "sentinel/error.hpp"

namespace sentinel {
namespace fs = std::filesystem;

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    lines.emplace_back(trim(line));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

std::string normalize_label(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : lowercase(text)) {
    if (c == '_' || c == '-' || c == '/' || c == ' ' || c == '\t') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::string_view header_name(Arrhythmia a) {
  switch (a) {
    case Arrhythmia::Asystole: return "Asystole";
    case Arrhythmia::Bradycardia: return "Bradycardia";
    case Arrhythmia::Tachycardia: return "Tachycardia";
    case Arrhythmia::VTach: return "Ventricular_Tachycardia";
    case Arrhythmia::VFib: return "Ventricular_Flutter_Fib";
  }
  return "";
}

// "16" or "16+24"; returns the byte offset.
std::size_t parse_format(std::string_view field) {
  const auto plus = field.find('+');
  if (field.substr(0, plus) != "16") {
    throw Error(ErrorCode::MalformedHeader, "unsupported sample format '" + std::string(field) + "' (only 16)");
  }
  if (plus == std::string_view::npos) return 0;
  auto offset = parse_number<std::size_t>(field.substr(plus + 1));
  if (!offset) throw Error(ErrorCode::MalformedHeader, "bad byte offset in '" + std::string(field) + "'");
  return *offset;
}

ChannelMeta parse_compact_signal(const std::vector<std::string>& f) {
  ChannelMeta meta;
  meta.gain = *parse_number<double>(f[2]);
  meta.baseline = *parse_number<int>(f[3]);
  meta.units = f[4];
  meta.name = f[5];
  if (meta.gain == 0.0) throw Error(ErrorCode::MalformedHeader, "gain must be non-zero for " + meta.name);
  return meta;
}

// gain[(baseline)][/units] adcres adczero initval checksum blocksize description...
ChannelMeta parse_wfdb_signal(const std::vector<std::string>& f) {
  ChannelMeta meta;
  meta.units = "mV";
  std::string_view spec = f.size() > 2 ? std::string_view(f[2]) : std::string_view("200");
  std::optional<int> baseline;
  if (const auto slash = spec.find('/'); slash != std::string_view::npos) {
    meta.units = std::string(spec.substr(slash + 1));
    spec = spec.substr(0, slash);
  }
  if (const auto paren = spec.find('('); paren != std::string_view::npos) {
    const auto close = spec.find(')', paren);
    if (close == std::string_view::npos) throw Error(ErrorCode::MalformedHeader, "unterminated baseline in gain field");
    baseline = parse_number<int>(spec.substr(paren + 1, close - paren - 1));
    if (!baseline) throw Error(ErrorCode::MalformedHeader, "bad baseline in gain field");
    spec = spec.substr(0, paren);
  }
  const auto gain = parse_number<double>(spec);
  if (!gain) throw Error(ErrorCode::MalformedHeader, "bad gain '" + f[2] + "'");
  meta.gain = *gain == 0.0 ? 200.0 : *gain;

  int adc_zero = 0;
  if (f.size() > 4) {
    const auto z = parse_number<int>(f[4]);
    if (!z) throw Error(ErrorCode::MalformedHeader, "bad ADC zero '" + f[4] + "'");
    adc_zero = *z;
  }
  meta.baseline = baseline.value_or(adc_zero);
  for (std::size_t i = 8; i < f.size(); ++i) {
    if (!meta.name.empty()) meta.name.push_back(' ');
    meta.name += f[i];
  }
  return meta;
}

bool is_compact(const std::vector<std::string>& f) {
  return f.size() == 6 && parse_number<double>(f[2]) && parse_number<int>(f[3]) && !parse_number<double>(f[4]);
}

}  // namespace

std::string_view to_string(ChannelKind kind) noexcept {
  switch (kind) {
    case ChannelKind::ECG: return "ECG";
    case ChannelKind::ABP: return "ABP";
    case ChannelKind::PPG: return "PPG";
    case ChannelKind::RESP: return "RESP";
    case ChannelKind::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(Arrhythmia arrhythmia) noexcept {
  switch (arrhythmia) {
    case Arrhythmia::Asystole: return "Asystole";
    case Arrhythmia::Bradycardia: return "Bradycardia";
    case Arrhythmia::Tachycardia: return "Tachycardia";
    case Arrhythmia::VTach: return "VTach";
    case Arrhythmia::VFib: return "VFib";
  }
  return "";
}

std::string_view to_string(Truth truth) noexcept {
  return truth == Truth::TrueAlarm ? "TrueAlarm" : "FalseAlarm";
}

std::optional<Arrhythmia> parse_arrhythmia(std::string_view text) {
  const std::string key = normalize_label(text);
  if (key == "asystole" || key == "asys") return Arrhythmia::Asystole;
  if (key == "bradycardia" || key == "extreme bradycardia" || key == "brady") return Arrhythmia::Bradycardia;
  if (key == "tachycardia" || key == "extreme tachycardia" || key == "tachy") return Arrhythmia::Tachycardia;
  if (key == "vtach" || key == "vt" || key == "ventricular tachycardia" || key == "vtachycardia") {
    return Arrhythmia::VTach;
  }
  if (key == "vfib" || key == "vf" || key == "ventricular flutter fib" || key == "ventricular fibrillation" ||
      key == "ventricular flutter" || key == "ventricular flutter fibrillation" || key == "vflutter") {
    return Arrhythmia::VFib;
  }
  return std::nullopt;
}

ChannelKind infer_channel_kind(std::string_view name) {
  const std::string lower = lowercase(trim(name));
  if (lower.find("abp") != std::string::npos || lower.find("art") != std::string::npos) return ChannelKind::ABP;
  if (lower.find("pleth") != std::string::npos || lower.find("ppg") != std::string::npos) return ChannelKind::PPG;
  if (lower.find("resp") != std::string::npos) return ChannelKind::RESP;

  static const std::set<std::string> leads = {"i", "ii", "iii", "v", "avr", "avl", "avf", "mcl"};
  if (leads.count(lower)) return ChannelKind::ECG;
  // V1..V6 and MCL1 style numbered leads.
  auto numbered = [&](std::string_view prefix) {
    if (lower.size() <= prefix.size() || lower.compare(0, prefix.size(), prefix) != 0) return false;
    return std::all_of(lower.begin() + static_cast<std::ptrdiff_t>(prefix.size()), lower.end(),
                       [](unsigned char c) { return std::isdigit(c); });
  };
  if (numbered("v") || numbered("mcl")) return ChannelKind::ECG;
  return ChannelKind::OTHER;
}

std::optional<std::size_t> Record::find_channel(std::string_view channel_name) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].name == channel_name) return i;
  }
  return std::nullopt;
}

void Record::validate() const {
  if (sample_rate <= 0.0) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (samples.empty() || samples.size() != channels.size()) {
    throw Error(ErrorCode::InvalidArgument, "record needs one sample sequence per channel");
  }
  const std::size_t n = samples.front().size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "record is empty");
  for (const auto& s : samples) {
    if (s.size() != n) throw Error(ErrorCode::InvalidArgument, "channel lengths differ");
  }
  if (alarm.alarm_index > n) throw Error(ErrorCode::InvalidArgument, "alarm index beyond record end");
}

HeaderInfo parse_header(std::string_view text) {
  HeaderInfo info;
  std::vector<std::string> body;
  std::vector<std::string> comments;
  for (auto& line : split_lines(text)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      comments.emplace_back(trim(std::string_view(line).substr(1)));
    } else {
      body.push_back(std::move(line));
    }
  }
  if (body.empty()) throw Error(ErrorCode::MalformedHeader, "missing record line");

  const auto rec = split_ws(body.front());
  if (rec.size() < 4) throw Error(ErrorCode::MalformedHeader, "record line needs 'name n_sig fs n_samples'");
  info.record_name = rec[0];
  const auto n_sig = parse_number<std::size_t>(rec[1]);
  const auto fs = parse_number<double>(std::string_view(rec[2]).substr(0, rec[2].find('/')));
  const auto n_samples = parse_number<std::size_t>(rec[3]);
  if (!n_sig || *n_sig == 0) throw Error(ErrorCode::MalformedHeader, "signal count must be a positive integer");
  if (!fs || !(*fs > 0.0)) throw Error(ErrorCode::MalformedHeader, "sampling frequency must be positive");
  if (!n_samples || *n_samples == 0) throw Error(ErrorCode::MalformedHeader, "sample count must be positive");
  info.sample_rate = *fs;
  info.n_samples = *n_samples;

  if (body.size() != 1 + *n_sig) {
    throw Error(ErrorCode::MalformedHeader,
                "expected " + std::to_string(*n_sig) + " signal lines, found " + std::to_string(body.size() - 1));
  }
  for (std::size_t i = 1; i < body.size(); ++i) {
    const auto fields = split_ws(body[i]);
    if (fields.size() < 2) throw Error(ErrorCode::MalformedHeader, "signal line " + std::to_string(i) + " too short");
    const std::size_t offset = parse_format(fields[1]);
    ChannelMeta meta = is_compact(fields) ? parse_compact_signal(fields) : parse_wfdb_signal(fields);
    if (meta.name.empty()) meta.name = "ch" + std::to_string(i - 1);
    meta.kind = infer_channel_kind(meta.name);
    if (i == 1) {
      info.byte_offset = offset;
    } else if (fields[0] != info.sample_files.front() || offset != info.byte_offset) {
      throw Error(ErrorCode::MalformedHeader, "all signals must share one interleaved sample file");
    }
    info.sample_files.push_back(fields[0]);
    info.channels.push_back(std::move(meta));
  }

  std::optional<Arrhythmia> arrhythmia;
  info.alarm.alarm_index = info.n_samples;
  for (const auto& c : comments) {
    const std::string key = normalize_label(c);
    if (key == "true alarm") {
      info.alarm.truth = Truth::TrueAlarm;
    } else if (key == "false alarm") {
      info.alarm.truth = Truth::FalseAlarm;
    } else if (key.rfind("alarm at ", 0) == 0) {
      const auto idx = parse_number<std::size_t>(trim(std::string_view(key).substr(9)));
      if (!idx || *idx > info.n_samples) throw Error(ErrorCode::MalformedHeader, "bad ALARM_AT '" + c + "'");
      info.alarm.alarm_index = *idx;
      info.alarm_index_explicit = true;
    } else if (auto a = parse_arrhythmia(c)) {
      arrhythmia = a;
    }
  }
  if (!arrhythmia) throw Error(ErrorCode::UnknownArrhythmia, "no comment names a supported arrhythmia");
  info.alarm.arrhythmia = *arrhythmia;
  return info;
}

double count_to_analog(std::int16_t count, double gain, int baseline) {
  if (count == kMissingCount) return std::numeric_limits<double>::quiet_NaN();
  return (static_cast<double>(count) - baseline) / gain;
}

std::int16_t analog_to_count(double value, double gain, int baseline) {
  if (!std::isfinite(value)) return kMissingCount;
  const double c = std::round(value * gain + baseline);
  return static_cast<std::int16_t>(std::clamp(c, -32767.0, 32767.0));
}

std::vector<std::int16_t> decode_frames(std::span<const std::uint8_t> bytes) {
  std::vector<std::int16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    out[i] = static_cast<std::int16_t>(u);
  }
  return out;
}

std::vector<std::uint8_t> encode_frames(std::span<const std::int16_t> counts) {
  std::vector<std::uint8_t> out(counts.size() * 2);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(counts[i]);
    out[2 * i] = static_cast<std::uint8_t>(u & 0xFF);
    out[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  return out;
}

Record load_record(const fs::path& header_path) {
  std::ifstream hin(header_path);
  if (!hin) throw Error(ErrorCode::IoFailure, "cannot open header " + header_path.string());
  std::stringstream buf;
  buf << hin.rdbuf();
  const HeaderInfo info = parse_header(buf.str());

  const fs::path data_path = header_path.parent_path() / info.sample_files.front();
  std::ifstream din(data_path, std::ios::binary);
  if (!din) throw Error(ErrorCode::IoFailure, "cannot open sample file " + data_path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(din)), std::istreambuf_iterator<char>());

  const std::size_t n_ch = info.channels.size();
  const std::size_t expected = info.byte_offset + info.n_samples * n_ch * 2;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::LengthMismatch, data_path.string() + " holds " + std::to_string(bytes.size()) +
                                               " bytes, header implies " + std::to_string(expected));
  }
  const auto counts = decode_frames(std::span(bytes).subspan(info.byte_offset));

  Record rec;
  rec.name = info.record_name;
  rec.channels = info.channels;
  rec.sample_rate = info.sample_rate;
  rec.alarm = info.alarm;
  rec.samples.assign(n_ch, std::vector<double>(info.n_samples));
  for (std::size_t t = 0; t < info.n_samples; ++t) {
    for (std::size_t c = 0; c < n_ch; ++c) {
      rec.samples[c][t] = count_to_analog(counts[t * n_ch + c], info.channels[c].gain, info.channels[c].baseline);
    }
  }
  return rec;
}

fs::path write_record(const Record& record, const fs::path& directory) {
  record.validate();
  const std::string data_name = record.name + ".dat";
  const fs::path header_path = directory / (record.name + ".hea");

  std::ostringstream h;
  h << record.name << ' ' << record.channels.size() << ' ' << record.sample_rate << ' ' << record.length() << '\n';
  for (const auto& ch : record.channels) {
    h << data_name << " 16 " << ch.gain << ' ' << ch.baseline << ' ' << (ch.units.empty() ? "NU" : ch.units) << ' '
      << ch.name << '\n';
  }
  h << '#' << header_name(record.alarm.arrhythmia) << '\n';
  if (record.alarm.truth) h << (*record.alarm.truth == Truth::TrueAlarm ? "#True alarm" : "#False alarm") << '\n';
  if (record.alarm.alarm_index != record.length()) h << "#ALARM_AT " << record.alarm.alarm_index << '\n';

  std::vector<std::int16_t> counts;
  counts.reserve(record.length() * record.channels.size());
  for (std::size_t t = 0; t < record.length(); ++t) {
    for (std::size_t c = 0; c < record.channels.size(); ++c) {
      counts.push_back(analog_to_count(record.samples[c][t], record.channels[c].gain, record.channels[c].baseline));
    }
  }
  const auto bytes = encode_frames(counts);

  std::ofstream hout(header_path);
  std::ofstream dout(directory / data_name, std::ios::binary);
  if (!hout || !dout) throw Error(ErrorCode::IoFailure, "cannot write record into " + directory.string());
  hout << h.str();
  dout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!hout || !dout) throw Error(ErrorCode::IoFailure, "write failed for " + record.name);
  return header_path;
}

Record resample_half(const Record& record) {
  if (std::abs(record.sample_rate - 250.0) > 1e-9) {
    throw Error(ErrorCode::UnsupportedRate, "resample_half expects 250 Hz, got " + std::to_string(record.sample_rate));
  }
  static const dsp::Sos anti_alias = dsp::butter_lowpass(4, 50.0, 250.0);
  Record out;
  out.name = record.name;
  out.channels = record.channels;
  out.sample_rate = 125.0;
  out.alarm = record.alarm;
  out.alarm.alarm_index = (record.alarm.alarm_index + 1) / 2;
  for (const auto& ch : record.samples) {
    const auto filtered = dsp::filtfilt(anti_alias, dsp::fill_missing(ch));
    std::vector<double> half((ch.size() + 1) / 2);
    for (std::size_t i = 0; i < half.size(); ++i) {
      half[i] = std::isnan(ch[2 * i]) ? std::numeric_limits<double>::quiet_NaN() : filtered[2 * i];
    }
    out.samples.push_back(std::move(half));
  }
  return out;
}

Record pre_alarm_window(const Record& record, double seconds) {
  if (!(seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "window length must be positive");
  const auto count = static_cast<std::size_t>(std::llround(seconds * record.sample_rate));
  const std::size_t end = record.alarm.alarm_index;
  if (count > end) {
    throw Error(ErrorCode::InsufficientData, "need " + std::to_string(count) + " samples before the alarm, have " +
                                                 std::to_string(end));
  }
  Record out;
  out.name = record.name;
  out.channels = record.channels;
  out.sample_rate = record.sample_rate;
  out.alarm = record.alarm;
  out.alarm.alarm_index = count;
  for (const auto& ch : record.samples) {
    out.samples.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(end - count),
                             ch.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  Manifest manifest;
  std::set<std::string> seen;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.emplace_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 3 && lowercase(fields[0]) == "record" && lowercase(fields[1]) == "arrhythmia" &&
          lowercase(fields[2]) == "label") {
        continue;
      }
      throw Error(ErrorCode::MalformedRow, "line 1: expected header 'record,arrhythmia,label'");
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3) throw Error(ErrorCode::MalformedRow, where + "expected 3 fields");

    ManifestEntry entry;
    fs::path p(fields[0]);
    if (p.empty()) throw Error(ErrorCode::MalformedRow, where + "empty record path");
    if (p.extension() != ".hea") p += ".hea";
    entry.record = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    const auto arr = parse_arrhythmia(fields[1]);
    if (!arr) throw Error(ErrorCode::MalformedRow, where + "unknown arrhythmia '" + fields[1] + "'");
    entry.arrhythmia = *arr;
    const std::string label = lowercase(fields[2]);
    if (label == "true") {
      entry.truth = Truth::TrueAlarm;
    } else if (label == "false") {
      entry.truth = Truth::FalseAlarm;
    } else if (label != "unknown") {
      throw Error(ErrorCode::MalformedRow, where + "label must be true, false, or unknown");
    }
    const std::string key = entry.record.lexically_normal().string();
    if (!seen.insert(key).second) throw Error(ErrorCode::DuplicateEntry, where + "duplicate record " + fields[0]);
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write manifest " + path.string());
  out << "record,arrhythmia,label\n";
  const fs::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    fs::path rel = e.record;
    if (!base.empty()) rel = e.record.lexically_relative(base);
    if (rel.empty()) rel = e.record;
    rel.replace_extension();
    out << rel.generic_string() << ',' << to_string(e.arrhythmia) << ','
        << (e.truth ? (*e.truth == Truth::TrueAlarm ? "true" : "false") : "unknown") << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Manifest scan_header_directory(const fs::path& directory) {
  std::vector<fs::path> headers;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(directory, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".hea") headers.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + directory.string() + ": " + ec.message());
  std::sort(headers.begin(), headers.end());
  Manifest manifest;
  for (const auto& h : headers) {
    std::ifstream in(h);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto info = parse_header(buf.str());
    manifest.entries.push_back({h, info.alarm.arrhythmia, info.alarm.truth});
  }
  return manifest;
}

}  // namespace sentinel
