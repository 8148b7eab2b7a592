#include "sentinel/synthkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sentinel/error.hpp"

namespace sentinel::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kQrsFrequency = 11.0;  // Hz, carrier of the narrow QRS wavelet
constexpr double kQrsSigma = 0.045;
constexpr double kPulseDelayAbp = 0.15;
constexpr double kPulseDelayPpg = 0.25;

struct Beat {
  double time;
  BeatLabel label;
  double rr;  // interval to the previous beat (or the nominal one for the first)
};

double lead_scale(const std::string& name) {
  if (name == "II") return 1.0;
  if (name == "V" || (name.size() > 1 && name[0] == 'V')) return 0.7;
  return 0.85;
}

double gamma_pulse(double tau, double rise) {
  if (tau <= 0.0) return 0.0;
  const double u = tau / rise;
  return u * std::exp(1.0 - u);
}

ChannelMeta channel_meta(const std::string& name) {
  ChannelMeta m;
  m.name = name;
  m.kind = infer_channel_kind(name);
  switch (m.kind) {
    case ChannelKind::ECG: m.units = "mV"; m.gain = 200.0; break;
    case ChannelKind::ABP: m.units = "mmHg"; m.gain = 100.0; break;
    case ChannelKind::PPG: m.units = "NU"; m.gain = 10000.0; break;
    default: m.units = "NU"; m.gain = 1000.0; break;
  }
  return m;
}

std::vector<Beat> schedule(const SynthSpec& spec, Rng& rng) {
  std::vector<Beat> beats;
  const double end = spec.duration_s - 0.05;
  auto sinus_rr = [&] { return 60.0 / spec.heart_rate * (1.0 + spec.rr_jitter * rng.uniform(-1.0, 1.0)); };
  auto event_rr = [&] { return 60.0 / spec.event_rate * (1.0 + 0.01 * rng.uniform(-1.0, 1.0)); };

  double t = 0.4;
  double rr = 60.0 / spec.heart_rate;
  auto push = [&](double time, BeatLabel label, double interval) { beats.push_back({time, label, interval}); };

  switch (spec.scenario) {
    case Scenario::Sinus:
      while (t < end) {
        push(t, BeatLabel::Normal, rr);
        rr = sinus_rr();
        t += rr;
      }
      break;
    case Scenario::Asystole: {
      const double stop = spec.duration_s - spec.asystole_gap_s;
      while (t < stop) {
        push(t, BeatLabel::Normal, rr);
        rr = sinus_rr();
        t += rr;
      }
      break;
    }
    case Scenario::Bradycardia:
    case Scenario::Tachycardia: {
      const double onset = spec.duration_s - spec.event_seconds;
      while (t < end) {
        push(t, BeatLabel::Normal, rr);
        rr = t < onset ? sinus_rr() : event_rr();
        t += rr;
      }
      break;
    }
    case Scenario::VTach: {
      const double run_rr = 60.0 / spec.event_rate;
      const double run_start = spec.duration_s - 0.3 - run_rr * (spec.vt_run_beats - 1);
      while (t + rr < run_start - run_rr) {
        push(t, BeatLabel::Normal, rr);
        rr = sinus_rr();
        t += rr;
      }
      push(t, BeatLabel::Normal, rr);
      for (int k = 0; k < spec.vt_run_beats; ++k) {
        t += event_rr();
        push(t, BeatLabel::Ventricular, run_rr);
      }
      break;
    }
    case Scenario::VFib: {
      const double onset = spec.duration_s - spec.event_seconds;
      while (t < onset - 0.3) {
        push(t, BeatLabel::Normal, rr);
        rr = sinus_rr();
        t += rr;
      }
      break;
    }
  }
  return beats;
}

void validate(const SynthSpec& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (!(s.sample_rate > 0.0)) fail("sample rate must be positive");
  if (!(s.duration_s >= 20.0)) fail("duration must be at least 20 s");
  if (!(s.heart_rate >= 20.0 && s.heart_rate <= 250.0)) fail("heart rate must lie in [20, 250] bpm");
  if (s.channels.empty()) fail("at least one channel is required");
  const bool rated = s.scenario == Scenario::Bradycardia || s.scenario == Scenario::Tachycardia ||
                     s.scenario == Scenario::VTach;
  if (rated && !(s.event_rate >= 15.0 && s.event_rate <= 300.0)) fail("event rate must lie in [15, 300] bpm");
  if (s.scenario == Scenario::VTach && s.vt_run_beats < 1) fail("VT run needs at least one beat");
  if (s.scenario == Scenario::Asystole && !(s.asystole_gap_s > 0.0 && s.asystole_gap_s < s.duration_s - 5.0)) {
    fail("asystole gap must be positive and leave 5 s of rhythm");
  }
  if ((s.scenario == Scenario::VFib || rated) && !(s.event_seconds > 0.0 && s.event_seconds < s.duration_s - 5.0)) {
    fail("event duration must be positive and leave 5 s of rhythm");
  }
  if (s.noise_mv < 0.0 || s.baseline_wander_mv < 0.0) fail("noise levels must be non-negative");
}

}  // namespace

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  return r * std::cos(kTwoPi * u2);
}

double normal_beat(double t, double rr) {
  const double qrs = std::cos(kTwoPi * kQrsFrequency * t) * std::exp(-t * t / (2.0 * kQrsSigma * kQrsSigma));
  const double t_peak = std::min(0.28, 0.45 * rr);
  const double dt = t - t_peak;
  return qrs + 0.2 * std::exp(-dt * dt / (2.0 * 0.045 * 0.045));
}

double ventricular_beat(double t, double qrs_width_s) {
  const double sigma = qrs_width_s / 5.0;
  const double dt = t - 0.25;
  return 2.5 * std::exp(-t * t / (2.0 * sigma * sigma)) - 0.5 * std::exp(-dt * dt / (2.0 * 0.06 * 0.06));
}

SynthRecord generate(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const auto beats = schedule(spec, rng);
  const double fs = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));

  SynthRecord out;
  out.expected = spec.scenario == Scenario::Sinus ? Truth::FalseAlarm : Truth::TrueAlarm;
  for (const auto& b : beats) {
    out.beat_times.push_back(b.time);
    out.beat_labels.push_back(b.label);
  }

  Record& rec = out.record;
  rec.name = spec.name;
  rec.sample_rate = fs;
  rec.alarm.arrhythmia = spec.alarm_tag;
  rec.alarm.truth = out.expected;
  rec.alarm.alarm_index = n;

  const double last_beat = beats.empty() ? 0.0 : beats.back().time;
  const double vf_onset = spec.duration_s - spec.event_seconds;
  const double wide = spec.qrs_width_ms / 1000.0;

  for (const auto& name : spec.channels) {
    ChannelMeta meta = channel_meta(name);
    std::vector<double> x(n, 0.0);
    Rng noise(rng.next());

    if (meta.kind == ChannelKind::ECG) {
      const double scale = lead_scale(name);
      for (const auto& b : beats) {
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((b.time - 0.35) * fs));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((b.time + 0.65) * fs));
        for (auto i = std::max<std::ptrdiff_t>(0, lo); i < std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n));
             ++i) {
          const double t = static_cast<double>(i) / fs - b.time;
          x[static_cast<std::size_t>(i)] +=
              scale * (b.label == BeatLabel::Ventricular ? ventricular_beat(t, wide) : normal_beat(t, b.rr));
        }
      }
      if (spec.scenario == Scenario::VFib) {
        const double phase = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < n; ++i) {
          const double t = static_cast<double>(i) / fs;
          if (t < vf_onset) continue;
          const double ramp = std::min(1.0, (t - vf_onset) / 0.5);
          const double amp = 0.45 * scale * ramp * (1.0 + 0.25 * std::sin(kTwoPi * 0.3 * t));
          x[i] += amp * std::sin(kTwoPi * spec.vf_frequency * t + phase + 0.4 * std::sin(kTwoPi * 0.25 * t));
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        x[i] += spec.noise_mv * noise.normal() + spec.baseline_wander_mv * std::sin(kTwoPi * 0.3 * t);
      }
    } else if (meta.kind == ChannelKind::ABP || meta.kind == ChannelKind::PPG) {
      const bool abp = meta.kind == ChannelKind::ABP;
      const double delay = abp ? kPulseDelayAbp : kPulseDelayPpg;
      const double rise = abp ? 0.09 : 0.14;
      const double level = abp ? 78.0 : 0.6;
      const double floor = abp ? 25.0 : 0.55;
      const double noise_std = abp ? 0.3 : 0.003;
      double collapse = -1.0;  // time at which pulsatile flow stops
      if (spec.scenario == Scenario::Asystole) collapse = last_beat + 0.6;
      if (spec.scenario == Scenario::VFib) collapse = vf_onset;

      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double base = level;
        if (collapse >= 0.0 && t > collapse) base = floor + (level - floor) * std::exp(-(t - collapse) / 1.5);
        x[i] = base;
      }
      for (const auto& b : beats) {
        double amp = abp ? 40.0 : 0.5;
        if (b.label == BeatLabel::Ventricular) amp = abp ? 5.0 : 0.06;
        const double onset = b.time + delay;
        const auto lo = static_cast<std::ptrdiff_t>(std::floor(onset * fs));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((onset + 1.2) * fs));
        for (auto i = std::max<std::ptrdiff_t>(0, lo); i < std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n));
             ++i) {
          const double tau = static_cast<double>(i) / fs - onset;
          const double notch = tau - 0.32;
          double v = gamma_pulse(tau, rise);
          if (abp) v += 0.12 * std::exp(-notch * notch / (2.0 * 0.03 * 0.03));
          x[static_cast<std::size_t>(i)] += amp * v;
        }
      }
      for (auto& v : x) v += noise_std * noise.normal();
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = 0.5 * std::sin(kTwoPi * 0.25 * static_cast<double>(i) / fs) + 0.01 * noise.normal();
      }
    }

    for (const auto& art : spec.artifacts) {
      if (art.channel != name) continue;
      const auto count = std::min(n, static_cast<std::size_t>(std::llround(art.seconds * fs)));
      for (std::size_t i = n - count; i < n; ++i) {
        switch (art.kind) {
          case Artifact::Kind::NoiseBurst: x[i] += art.amplitude * noise.normal(); break;
          case Artifact::Kind::Dropout: x[i] = 0.001 * noise.normal(); break;
          case Artifact::Kind::Missing: x[i] = std::numeric_limits<double>::quiet_NaN(); break;
          case Artifact::Kind::FlatLine: x[i] = x[n - count]; break;
        }
      }
    }
    // Store exactly what the 16-bit file will hold so in-memory and
    // on-disk records classify identically.
    for (auto& v : x) v = count_to_analog(analog_to_count(v, meta.gain, meta.baseline), meta.gain, meta.baseline);
    rec.channels.push_back(std::move(meta));
    rec.samples.push_back(std::move(x));
  }
  return out;
}

std::vector<SynthSpec> suite_specs(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SynthSpec> specs;
  int index = 0;
  for (Arrhythmia tag : kAllArrhythmias) {
    for (int j = 0; j < 10; ++j, ++index) {
      SynthSpec s;
      s.alarm_tag = tag;
      s.seed = rng.next();
      s.noise_mv = rng.uniform(0.005, 0.02);
      s.heart_rate = rng.uniform(60.0, 95.0);
      std::string idx = std::to_string(index);
      s.name = "sim" + std::string(3 - idx.size(), '0') + idx;
      if (j < 5) {
        switch (tag) {
          case Arrhythmia::Asystole:
            s.scenario = Scenario::Asystole;
            s.asystole_gap_s = rng.uniform(4.5, 8.0);
            break;
          case Arrhythmia::Bradycardia:
            s.scenario = Scenario::Bradycardia;
            s.event_rate = rng.uniform(28.0, 38.0);
            s.event_seconds = rng.uniform(20.0, 30.0);
            break;
          case Arrhythmia::Tachycardia:
            s.scenario = Scenario::Tachycardia;
            s.event_rate = rng.uniform(150.0, 180.0);
            s.event_seconds = rng.uniform(20.0, 30.0);
            break;
          case Arrhythmia::VTach:
            s.scenario = Scenario::VTach;
            s.vt_run_beats = 6 + static_cast<int>(rng.uniform() * 7.0);
            s.heart_rate = rng.uniform(60.0, 80.0);
            s.event_rate = rng.uniform(145.0, 175.0);
            s.qrs_width_ms = rng.uniform(120.0, 160.0);
            break;
          case Arrhythmia::VFib:
            s.scenario = Scenario::VFib;
            s.vf_frequency = rng.uniform(4.0, 6.5);
            s.event_seconds = rng.uniform(6.0, 10.0);
            break;
        }
      } else {
        s.scenario = Scenario::Sinus;
        s.heart_rate = rng.uniform(55.0, 100.0);
        if (j == 7) s.artifacts.push_back({"V", Artifact::Kind::NoiseBurst, 6.0, 0.5});
        if (j == 8) {
          if (tag == Arrhythmia::Asystole) {
            s.artifacts.push_back({"II", Artifact::Kind::Missing, 8.0, 0.0});
            s.artifacts.push_back({"V", Artifact::Kind::Dropout, 8.0, 0.0});
          } else {
            s.artifacts.push_back({"PLETH", Artifact::Kind::Missing, 10.0, 0.0});
          }
        }
        if (j == 9) s.artifacts.push_back({"ABP", Artifact::Kind::FlatLine, 10.0, 0.0});
      }
      specs.push_back(std::move(s));
    }
  }
  return specs;
}

std::filesystem::path generate_suite(std::uint64_t seed, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec || !std::filesystem::is_directory(directory)) {
    throw Error(ErrorCode::IoFailure, "cannot create " + directory.string());
  }
  Manifest manifest;
  for (const auto& spec : suite_specs(seed)) {
    const auto synth = generate(spec);
    const auto header = write_record(synth.record, directory);
    manifest.entries.push_back({header, spec.alarm_tag, synth.expected});
  }
  const auto path = directory / "manifest.csv";
  write_manifest(manifest, path);
  return path;
}

std::vector<std::vector<double>> surrogate_beats(BeatLabel kind, std::size_t count, std::uint64_t seed,
                                                 double sample_rate) {
  Rng rng(seed);
  std::vector<std::vector<double>> beats;
  for (std::size_t k = 0; k < count; ++k) {
    const bool ventricular = kind == BeatLabel::Ventricular;
    const double rate = ventricular ? rng.uniform(110.0, 170.0) : rng.uniform(60.0, 100.0);
    const double rr = 60.0 / rate;
    const double width = rng.uniform(0.12, 0.17);
    const double scale = rng.uniform(0.8, 1.2);
    const auto before = static_cast<std::size_t>(std::llround(rr / 3.0 * sample_rate));
    const auto after = static_cast<std::size_t>(std::llround(2.0 * rr / 3.0 * sample_rate));
    std::vector<double> beat;
    for (std::size_t i = 0; i < before + after; ++i) {
      const double t = (static_cast<double>(i) - static_cast<double>(before)) / sample_rate;
      const double v = ventricular ? ventricular_beat(t, width) : normal_beat(t, rr);
      beat.push_back(scale * v + 0.01 * rng.normal());
    }
    beats.push_back(std::move(beat));
  }
  return beats;
}

}  // namespace sentinel::synth
