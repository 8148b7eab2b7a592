#include "sentinel/alarm_logic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sentinel/beat_banks.hpp"
#include "sentinel/dsp.hpp"
#include "sentinel/dtw.hpp"
#include "sentinel/error.hpp"

namespace sentinel {
namespace {

constexpr double kVfWindowSeconds = 2.0;
constexpr double kVfStepSeconds = 0.25;
constexpr double kVfBandLo = 0.5;
constexpr double kVfBandHi = 30.0;
constexpr double kVfDominantLo = 2.0;
constexpr double kVfDominantHi = 8.0;
constexpr double kVfHalfWidth = 1.0;
constexpr double kVfConcentration = 0.6;
constexpr double kVfHalfVarianceRatio = 3.0;
constexpr double kParticipationValidity = 0.5;
constexpr double kSpectralMargin = 1.0;  // seconds of context around the window for beat labelling

bool beat_channel(ChannelKind kind) {
  return kind == ChannelKind::ECG || kind == ChannelKind::ABP || kind == ChannelKind::PPG;
}

int priority(const ChannelAnalysis& c) {
  if (c.kind == ChannelKind::ECG) return c.name == "II" ? 0 : 1;
  if (c.kind == ChannelKind::ABP) return 2;
  return 3;
}

std::size_t samples(double seconds, double fs) { return static_cast<std::size_t>(std::llround(seconds * fs)); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool overlaps(std::span<const InvalidInterval> invalid, std::size_t start, std::size_t end) {
  return std::any_of(invalid.begin(), invalid.end(), [&](const auto& iv) { return iv.start < end && start < iv.end; });
}

bool inside(std::span<const InvalidInterval> invalid, std::size_t i) {
  return std::any_of(invalid.begin(), invalid.end(), [&](const auto& iv) { return iv.start <= i && i < iv.end; });
}

ChannelEvidence evidence(const ChannelAnalysis& c, std::string test, bool positive, std::vector<Witness> w = {}) {
  return {c.name, std::move(test), positive, std::move(w)};
}

// Spectral beat labels for one ECG channel, computed on the window plus a
// little context so the +-100 ms cut never hits the edge of the window.
std::vector<BeatLabel> spectral_labels(const Record& record, const AlarmAnalysis& a, const ChannelAnalysis& c) {
  if (c.beats.empty()) return {};
  const auto margin = samples(kSpectralMargin, a.sample_rate);
  const std::size_t lo = a.window.start > margin ? a.window.start - margin : 0;
  const std::size_t hi = std::min(record.length(), a.window.end + margin);
  const auto x = dsp::fill_missing(record.channel(c.channel).subspan(lo, hi - lo));
  std::vector<std::size_t> local;
  for (auto b : c.beats) local.push_back(b - lo);
  return label_beats_spectral(x, a.sample_rate, local);
}

const ChannelAnalysis* first_abp(const AlarmAnalysis& a) {
  for (const auto& c : a.channels) {
    if (c.kind == ChannelKind::ABP && c.validity > kParticipationValidity) return &c;
  }
  return nullptr;
}

void abp_branch(const Record& record, const AlarmAnalysis& a, const TestConfig& config, std::vector<bool>& votes,
                Verdict& v) {
  if (const auto* abp = first_abp(a)) {
    const auto x = record.channel(abp->channel).subspan(a.window.start, a.window.length());
    std::vector<double> finite;
    for (double s : x) {
      if (std::isfinite(s)) finite.push_back(s);
    }
    const bool pos = abp_vt_positive(x, config);
    votes.push_back(pos);
    v.evidence.push_back(evidence(*abp, "vtach-abp", pos, {{"abp_std", finite.size() > 1 ? dsp::stddev(finite) : 0.0}}));
  }
}

void ecg_vt_evidence(const ChannelAnalysis& c, std::span<const BeatLabel> labels, double fs, const TestConfig& config,
                     std::vector<bool>& votes, Verdict& v, std::string test) {
  const auto hr = max_ventricular_run_hr(c.beats, labels, fs, config);
  const bool pos = hr && *hr > config.vt_hr;
  votes.push_back(pos);
  std::vector<Witness> w{
      {"ventricular_beats", static_cast<double>(std::count(labels.begin(), labels.end(), BeatLabel::Ventricular))},
      {"beats", static_cast<double>(c.beats.size())}};
  if (hr) w.push_back({"max_run_hr", *hr});
  v.evidence.push_back(evidence(c, std::move(test), pos, std::move(w)));
}

// Lead II when present, else the first ECG channel, else channels.size().
std::size_t bank_lead(const Record& record) {
  if (const auto ii = record.find_channel("II"); ii && record.channels[*ii].kind == ChannelKind::ECG) return *ii;
  for (std::size_t i = 0; i < record.channels.size(); ++i) {
    if (record.channels[i].kind == ChannelKind::ECG) return i;
  }
  return record.channels.size();
}

void finish(Verdict& v, const std::vector<bool>& votes, Method method) {
  v.decision = vote(votes, method) ? Truth::TrueAlarm : Truth::FalseAlarm;
  if (votes.empty()) v.notes.push_back("no channel could be assessed; alarm kept");
}

}  // namespace

void TestConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
  };
  positive(analysis_window_s, "analysis_window_s");
  positive(asystole_gap_s, "asystole_gap_s");
  positive(brady_hr, "brady_hr");
  positive(tachy_hr, "tachy_hr");
  positive(vt_hr, "vt_hr");
  positive(vt_abp_std, "vt_abp_std");
  positive(vf_min_duration_s, "vf_min_duration_s");
  positive(regular_rr_cv_max, "regular_rr_cv_max");
  positive(regular_rr_min_s, "regular_rr_min_s");
  positive(regular_rr_max_s, "regular_rr_max_s");
  positive(detection_lead_in_s, "detection_lead_in_s");
  if (!(dtw_radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dtw_radius must be non-negative");
  if (brady_beats < 2 || tachy_beats < 2 || vt_beats < 2) {
    throw Error(ErrorCode::InvalidArgument, "beat window lengths must be at least 2");
  }
  if (regular_min_beats < 2) throw Error(ErrorCode::InvalidArgument, "regular_min_beats must be at least 2");
  if (regular_rr_min_s >= regular_rr_max_s) throw Error(ErrorCode::InvalidArgument, "RR limits out of order");
}

TestConfig parse_config(std::string_view text, TestConfig base) {
  TestConfig c = base;
  struct Field {
    const char* key;
    double* real;
    std::size_t* count;
  };
  const Field fields[] = {
      {"analysis_window_s", &c.analysis_window_s, nullptr},
      {"asystole_gap_s", &c.asystole_gap_s, nullptr},
      {"brady_hr", &c.brady_hr, nullptr},
      {"brady_beats", nullptr, &c.brady_beats},
      {"tachy_hr", &c.tachy_hr, nullptr},
      {"tachy_beats", nullptr, &c.tachy_beats},
      {"vt_hr", &c.vt_hr, nullptr},
      {"vt_beats", nullptr, &c.vt_beats},
      {"vt_abp_std", &c.vt_abp_std, nullptr},
      {"vf_min_duration_s", &c.vf_min_duration_s, nullptr},
      {"regular_rr_cv_max", &c.regular_rr_cv_max, nullptr},
      {"regular_rr_min_s", &c.regular_rr_min_s, nullptr},
      {"regular_rr_max_s", &c.regular_rr_max_s, nullptr},
      {"regular_min_beats", nullptr, &c.regular_min_beats},
      {"detection_lead_in_s", &c.detection_lead_in_s, nullptr},
      {"dtw_radius", &c.dtw_radius, nullptr},
  };
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    auto where = [&] { return "config line " + std::to_string(line_no) + ": "; };
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, where() + "expected key = value");
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    const auto* f = std::find_if(std::begin(fields), std::end(fields), [&](const Field& f) { return key == f.key; });
    if (f == std::end(fields)) throw Error(ErrorCode::InvalidArgument, where() + "unknown key '" + key + "'");
    const char* first = value.data();
    const char* last = value.data() + value.size();
    std::from_chars_result r;
    if (f->real) {
      r = std::from_chars(first, last, *f->real);
    } else {
      r = std::from_chars(first, last, *f->count);
    }
    if (value.empty() || r.ec != std::errc() || r.ptr != last) {
      throw Error(ErrorCode::InvalidArgument, where() + "bad value '" + value + "' for " + key);
    }
  }
  c.validate();
  return c;
}

TestConfig load_config(const std::filesystem::path& path, TestConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Baseline: return "baseline";
    case Method::Improved: return "improved";
    case Method::DtwFull: return "dtw-full";
    case Method::DtwVbank: return "dtw-vbank";
    case Method::DtwSelfMin: return "dtw-self-min";
    case Method::DtwSelfKl: return "dtw-self-kl";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view text) {
  for (auto m : {Method::Baseline, Method::Improved, Method::DtwFull, Method::DtwVbank, Method::DtwSelfMin,
                 Method::DtwSelfKl}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

bool is_dtw_method(Method method) noexcept { return method != Method::Baseline && method != Method::Improved; }

SampleWindow analysis_window(const Record& record, double seconds) {
  const std::size_t end = std::min(record.alarm.alarm_index, record.length());
  const std::size_t len = samples(seconds, record.sample_rate);
  return {end > len ? end - len : 0, end};
}

AlarmAnalysis analyze_alarm(const Record& record, const TestConfig& config, std::span<const BeatAnnotation> annotations) {
  record.validate();
  AlarmAnalysis a;
  a.sample_rate = record.sample_rate;
  a.window = analysis_window(record, config.analysis_window_s);
  if (a.window.length() == 0) throw Error(ErrorCode::InsufficientData, "no signal before the alarm in " + record.name);
  auto quality = assess_quality(record, a.window);
  a.clean_metrics = quality.clean_metrics;

  const auto lead_in = samples(config.detection_lead_in_s, record.sample_rate);
  const std::size_t lo = a.window.start > lead_in ? a.window.start - lead_in : 0;
  for (std::size_t c = 0; c < record.channels.size(); ++c) {
    ChannelAnalysis ch;
    ch.channel = c;
    ch.name = record.channels[c].name;
    ch.kind = record.channels[c].kind;
    ch.validity = quality.channels[c].validity_weight;
    ch.invalid_in_window = quality.channels[c].invalid_in_window;
    ch.invalid = std::move(quality.channels[c].invalid);

    const auto ext = std::find_if(annotations.begin(), annotations.end(),
                                  [&](const BeatAnnotation& b) { return b.channel == c; });
    if (ext != annotations.end()) {
      ch.external = true;
      for (std::size_t i = 0; i < ext->indices.size(); ++i) {
        const auto idx = ext->indices[i];
        if (idx < a.window.start || idx >= a.window.end) continue;
        ch.beats.push_back(idx);
        if (ext->has_labels()) ch.labels.push_back(ext->labels[i]);
      }
    } else if (beat_channel(ch.kind) && ch.validity > 0.0) {
      const auto x = dsp::fill_missing(record.channel(c).subspan(lo, a.window.end - lo));
      BeatAnnotation found;
      try {
        found = ch.kind == ChannelKind::ECG ? detect_qrs(x, record.sample_rate) : detect_pulses(x, record.sample_rate);
      } catch (const Error&) {
        found = {};
      }
      for (auto idx : found.indices) {
        if (idx + lo >= a.window.start) ch.beats.push_back(idx + lo);
      }
    }
    a.channels.push_back(std::move(ch));
  }
  return a;
}

std::vector<std::size_t> reliability_order(const AlarmAnalysis& analysis) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < analysis.channels.size(); ++i) {
    if (beat_channel(analysis.channels[i].kind)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& a = analysis.channels[x];
    const auto& b = analysis.channels[y];
    if (a.validity != b.validity) return a.validity > b.validity;
    return priority(a) < priority(b);
  });
  return order;
}

std::optional<std::size_t> most_reliable_channel(const AlarmAnalysis& analysis) {
  const auto order = reliability_order(analysis);
  if (order.empty()) return std::nullopt;
  return order.front();
}

bool channel_regular(std::span<const std::size_t> beats, SampleWindow window, std::size_t invalid_in_window,
                     double fs, const TestConfig& config) {
  if (invalid_in_window > 0 || beats.size() < config.regular_min_beats) return false;
  std::vector<double> rr;
  for (std::size_t i = 1; i < beats.size(); ++i) rr.push_back(static_cast<double>(beats[i] - beats[i - 1]) / fs);
  for (double r : rr) {
    if (r < config.regular_rr_min_s || r > config.regular_rr_max_s) return false;
  }
  if (dsp::stddev(rr) / dsp::mean(rr) > config.regular_rr_cv_max) return false;
  const double lead = static_cast<double>(beats.front() - window.start) / fs;
  const double trail = static_cast<double>(window.end - 1 - beats.back()) / fs;
  return lead <= config.regular_rr_max_s && trail <= config.regular_rr_max_s;
}

RegularActivity regular_activity(const AlarmAnalysis& analysis, const TestConfig& config) {
  RegularActivity r;
  for (const auto& c : analysis.channels) {
    const bool ok = beat_channel(c.kind) &&
                    channel_regular(c.beats, analysis.window, c.invalid_in_window, analysis.sample_rate, config);
    double cv = std::numeric_limits<double>::quiet_NaN();
    if (c.beats.size() >= 3) {
      std::vector<double> rr;
      for (std::size_t i = 1; i < c.beats.size(); ++i) rr.push_back(static_cast<double>(c.beats[i] - c.beats[i - 1]));
      cv = dsp::stddev(rr) / dsp::mean(rr);
    }
    r.per_channel.push_back(ok);
    r.rr_cv.push_back(cv);
    r.overall = r.overall || ok;
  }
  return r;
}

std::size_t longest_beat_free_run(std::span<const std::size_t> beats, SampleWindow window) {
  std::vector<std::size_t> in;
  for (auto b : beats) {
    if (b >= window.start && b < window.end) in.push_back(b);
  }
  if (in.empty()) return window.length();
  std::size_t best = in.front() - window.start;
  for (std::size_t i = 1; i < in.size(); ++i) best = std::max(best, in[i] - in[i - 1] - 1);
  return std::max(best, window.end - in.back() - 1);
}

bool test_asystole(std::span<const std::size_t> beats, SampleWindow window, double fs, const TestConfig& config) {
  const auto gap = samples(config.asystole_gap_s, fs);
  if (window.length() < gap) return true;
  return longest_beat_free_run(beats, window) >= gap;
}

std::vector<std::size_t> merged_beat_stream(const AlarmAnalysis& analysis) {
  const auto order = reliability_order(analysis);
  if (order.empty()) return {};
  const auto& primary = analysis.channels[order.front()];
  std::vector<std::size_t> out;
  for (auto b : primary.beats) {
    if (!inside(primary.invalid, b)) out.push_back(b);
  }
  for (const auto& iv : primary.invalid) {
    const std::size_t s = std::max(iv.start, analysis.window.start);
    const std::size_t e = std::min(iv.end, analysis.window.end);
    if (s >= e) continue;
    for (std::size_t k = 1; k < order.size(); ++k) {
      const auto& backup = analysis.channels[order[k]];
      if (backup.validity <= 0.0 || overlaps(backup.invalid, s, e)) continue;
      for (auto b : backup.beats) {
        if (b >= s && b < e) out.push_back(b);
      }
      break;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool test_bradycardia(std::span<const std::size_t> beats, double fs, const TestConfig& config) {
  if (beats.size() < config.brady_beats) return true;
  const auto hr = window_heart_rate(beats, fs, config.brady_beats);
  return *std::min_element(hr.begin(), hr.end()) < config.brady_hr;
}

bool test_tachycardia(std::span<const std::size_t> beats, double fs, const TestConfig& config) {
  if (beats.size() < config.tachy_beats) return true;
  const auto hr = window_heart_rate(beats, fs, config.tachy_beats);
  return *std::max_element(hr.begin(), hr.end()) > config.tachy_hr;
}

VfibSummary vfib_summary(std::span<const double> ecg, double fs, const TestConfig& config) {
  const auto w = samples(kVfWindowSeconds, fs);
  const auto need = std::max(w, samples(config.vf_min_duration_s, fs));
  if (ecg.size() < need) {
    throw Error(ErrorCode::WindowTooShort, "VF test needs " + std::to_string(need) + " samples, got " +
                                               std::to_string(ecg.size()));
  }
  const auto x = dsp::fill_missing(ecg);
  const auto step = std::max<std::size_t>(1, samples(kVfStepSeconds, fs));
  const std::size_t half = w / 2;

  VfibSummary out;
  std::optional<std::size_t> run_first;
  double run_freq = 0.0;
  std::size_t prev_start = 0;
  auto close_run = [&](std::size_t last_start) {
    const double d = static_cast<double>(last_start - *run_first) / fs + 1.0;
    if (d > out.sustained_s) {
      out.sustained_s = d;
      out.dominant_hz = run_freq;
    }
    run_first.reset();
  };
  for (std::size_t start = 0; start + w <= x.size(); start += step) {
    const auto seg = std::span<const double>(x).subspan(start, w);
    bool pass = false;
    double f_dom = 0.0;
    const double v1 = dsp::variance(seg.first(half));
    const double v2 = dsp::variance(seg.subspan(half));
    if (v1 > 0.0 && v2 > 0.0 && v1 / v2 <= kVfHalfVarianceRatio && v2 / v1 <= kVfHalfVarianceRatio) {
      const auto psd = periodogram(seg, fs);
      double peak = -1.0;
      for (std::size_t k = 0; k < psd.frequencies.size(); ++k) {
        const double f = psd.frequencies[k];
        if (f >= kVfBandLo && f <= kVfBandHi && psd.density[k] > peak) {
          peak = psd.density[k];
          f_dom = f;
        }
      }
      const double total = band_power(psd, kVfBandLo, kVfBandHi);
      if (total > 0.0 && f_dom >= kVfDominantLo && f_dom <= kVfDominantHi) {
        pass = band_power(psd, f_dom - kVfHalfWidth, f_dom + kVfHalfWidth) / total >= kVfConcentration;
      }
    }
    if (pass && !run_first) {
      run_first = start;
      run_freq = f_dom;
    }
    if (!pass && run_first) close_run(prev_start);
    prev_start = start;
  }
  if (run_first) close_run(prev_start);
  out.positive = out.sustained_s >= config.vf_min_duration_s;
  return out;
}

bool test_vfib(std::span<const double> ecg, double fs, const TestConfig& config) {
  return vfib_summary(ecg, fs, config).positive;
}

std::optional<double> max_ventricular_run_hr(std::span<const std::size_t> beats, std::span<const BeatLabel> labels,
                                             double fs, const TestConfig& config) {
  if (beats.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "beats and labels differ in length");
  }
  const std::size_t k = config.vt_beats;
  std::optional<double> best;
  std::size_t run = 0;
  for (std::size_t i = 0; i < beats.size(); ++i) {
    run = labels[i] == BeatLabel::Ventricular ? run + 1 : 0;
    if (run >= k) {
      const double span = static_cast<double>(beats[i] - beats[i + 1 - k]) / fs;
      const double hr = 60.0 * static_cast<double>(k - 1) / span;
      best = best ? std::max(*best, hr) : hr;
    }
  }
  return best;
}

bool ecg_vt_positive(std::span<const std::size_t> beats, std::span<const BeatLabel> labels, double fs,
                     const TestConfig& config) {
  const auto hr = max_ventricular_run_hr(beats, labels, fs, config);
  return hr && *hr > config.vt_hr;
}

bool abp_vt_positive(std::span<const double> abp, const TestConfig& config) {
  std::vector<double> finite;
  for (double v : abp) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.size() < 2) return false;
  return dsp::stddev(finite) < config.vt_abp_std;
}

bool vote(const std::vector<bool>& positives, Method method) {
  if (positives.empty()) return true;
  if (method == Method::Baseline) return std::all_of(positives.begin(), positives.end(), [](bool b) { return b; });
  return std::any_of(positives.begin(), positives.end(), [](bool b) { return b; });
}

Verdict classify_alarm(const Record& record, Method method, const TestConfig& config,
                       const ClassifierResources& resources) {
  const Arrhythmia arr = record.alarm.arrhythmia;
  if (is_dtw_method(method) && arr != Arrhythmia::VTach) {
    throw Error(ErrorCode::UnsupportedMethod,
                std::string(to_string(method)) + " is defined for ventricular tachycardia only, got " +
                    std::string(to_string(arr)));
  }
  const auto a = analyze_alarm(record, config, resources.annotations);
  const double fs = a.sample_rate;

  Verdict v;
  v.method = std::string(to_string(method));
  v.arrhythmia = arr;

  const auto reg = regular_activity(a, config);
  for (std::size_t i = 0; i < a.channels.size(); ++i) {
    const auto& c = a.channels[i];
    if (!beat_channel(c.kind)) continue;
    std::vector<Witness> w{{"validity", c.validity}, {"beats", static_cast<double>(c.beats.size())}};
    if (std::isfinite(reg.rr_cv[i])) w.push_back({"rr_cv", reg.rr_cv[i]});
    v.evidence.push_back(evidence(c, "regular-activity", reg.per_channel[i], std::move(w)));
  }
  if (reg.overall) {
    v.gate_fired = true;
    v.decision = Truth::FalseAlarm;
    return v;
  }

  std::vector<bool> votes;
  switch (arr) {
    case Arrhythmia::Asystole: {
      const auto stream = merged_beat_stream(a);
      const bool pos = test_asystole(stream, a.window, fs, config);
      const auto primary = most_reliable_channel(a);
      ChannelEvidence ev{primary ? a.channels[*primary].name : std::string("none"), "asystole", pos,
                         {{"longest_gap_s", static_cast<double>(longest_beat_free_run(stream, a.window)) / fs},
                          {"beats", static_cast<double>(stream.size())}}};
      v.evidence.push_back(std::move(ev));
      v.decision = pos ? Truth::TrueAlarm : Truth::FalseAlarm;
      break;
    }
    case Arrhythmia::Bradycardia:
    case Arrhythmia::Tachycardia: {
      const bool brady = arr == Arrhythmia::Bradycardia;
      const auto primary = most_reliable_channel(a);
      if (!primary) {
        v.notes.push_back("no beat channel; alarm kept");
        v.decision = Truth::TrueAlarm;
        break;
      }
      const auto& c = a.channels[*primary];
      const std::size_t k = brady ? config.brady_beats : config.tachy_beats;
      const bool pos = brady ? test_bradycardia(c.beats, fs, config) : test_tachycardia(c.beats, fs, config);
      std::vector<Witness> w{{"beats", static_cast<double>(c.beats.size())}};
      if (c.beats.size() >= k) {
        const auto hr = window_heart_rate(c.beats, fs, k);
        w.push_back(brady ? Witness{"min_hr", *std::min_element(hr.begin(), hr.end())}
                          : Witness{"max_hr", *std::max_element(hr.begin(), hr.end())});
      } else {
        v.notes.push_back("too few beats on " + c.name + "; alarm kept");
      }
      v.evidence.push_back(evidence(c, brady ? "bradycardia" : "tachycardia", pos, std::move(w)));
      v.decision = pos ? Truth::TrueAlarm : Truth::FalseAlarm;
      break;
    }
    case Arrhythmia::VFib: {
      for (const auto& c : a.channels) {
        if (c.kind != ChannelKind::ECG || c.validity <= kParticipationValidity) continue;
        const auto x = record.channel(c.channel).subspan(a.window.start, a.window.length());
        bool pos = true;
        std::vector<Witness> w;
        try {
          const auto s = vfib_summary(x, fs, config);
          pos = s.positive;
          w = {{"sustained_s", s.sustained_s}, {"dominant_hz", s.dominant_hz}};
        } catch (const Error& e) {
          if (e.code() != ErrorCode::WindowTooShort) throw;
          v.notes.push_back("window too short for VF test on " + c.name);
        }
        votes.push_back(pos);
        v.evidence.push_back(evidence(c, "vfib", pos, std::move(w)));
      }
      finish(v, votes, Method::Improved);
      break;
    }
    case Arrhythmia::VTach: {
      if (method == Method::Baseline || method == Method::Improved) {
        for (const auto& c : a.channels) {
          if (c.kind != ChannelKind::ECG || c.validity <= kParticipationValidity) continue;
          const auto labels = c.labels.size() == c.beats.size() && !c.labels.empty() ? c.labels
                                                                                     : spectral_labels(record, a, c);
          ecg_vt_evidence(c, labels, fs, config, votes, v, "vtach-ecg");
        }
        abp_branch(record, a, config, votes, v);
        finish(v, votes, method);
        break;
      }
      if (method == Method::DtwFull) {
        if (!resources.corpus) throw Error(ErrorCode::EmptyCorpus, "dtw-full needs a training corpus");
        const WarpParams params{static_cast<std::size_t>(std::llround(config.dtw_radius))};
        auto full = classify_full_signal(record, *resources.corpus, params);
        v.decision = full.decision;
        for (auto& e : full.evidence) v.evidence.push_back(std::move(e));
        for (auto& n : full.notes) v.notes.push_back(std::move(n));
        break;
      }

      // Beat-bank methods: lead II beats relabelled by DTW, ABP branch kept.
      const std::size_t lead = bank_lead(record);
      const bool has_lead = lead < record.channels.size();
      std::optional<BeatBank> self;
      std::string self_error;
      if (has_lead) {
        try {
          self = extract_self_bank(record, lead, config.analysis_window_s);
        } catch (const Error& e) {
          self_error = e.what();
        }
      }
      BankClassifier clf;
      std::optional<NoveltyStats> stats;
      if (method == Method::DtwVbank) {
        if (!resources.ventricular_bank || resources.ventricular_bank->empty()) {
          throw Error(ErrorCode::EmptyBank, "dtw-vbank needs a ventricular beat bank");
        }
        clf.method = BankMethod::VentricularBank;
        clf.ventricular = resources.ventricular_bank;
        if (self) {
          clf.reference = &*self;
        } else if (resources.standard_bank && !resources.standard_bank->empty()) {
          clf.reference = resources.standard_bank;
          v.notes.push_back("self bank unavailable (" + self_error + "); using the standard bank");
        }
      } else if (self) {
        clf.method = method == Method::DtwSelfMin ? BankMethod::SelfMin : BankMethod::SelfKl;
        clf.reference = &*self;
        stats = bank_novelty_stats(*self);
        clf.stats = &*stats;
      }
      if (!has_lead || !clf.reference) {
        v.notes.push_back(has_lead ? "no reference bank (" + self_error + "); alarm kept" : "no ECG lead; alarm kept");
        v.decision = Truth::TrueAlarm;
        break;
      }
      const auto& c = a.channels[lead];
      if (c.validity > kParticipationValidity) {
        try {
          const auto labels = vt_labels_from_bank(record, c.channel, c.beats, clf);
          ecg_vt_evidence(c, labels, fs, config, votes, v, "vtach-bank");
        } catch (const Error& e) {
          if (e.code() != ErrorCode::TooFewBeats) throw;
          v.notes.push_back("too few beats on " + c.name + " for bank labelling");
        }
      }
      if (stats) {
        v.evidence.push_back({c.name, "self-bank", false,
                              {{"mu_min", stats->mu_min},
                               {"sigma_min", stats->sigma_min},
                               {"mu_kl", stats->mu_kl},
                               {"sigma_kl", stats->sigma_kl}}});
      }
      abp_branch(record, a, config, votes, v);
      finish(v, votes, Method::Improved);
      break;
    }
  }
  return v;
}

}  // namespace sentinel
