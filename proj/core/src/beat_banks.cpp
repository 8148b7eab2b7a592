#include "sentinel/beat_banks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sentinel/dsp.hpp"
#include "sentinel/error.hpp"
#include "sentinel/signal_quality.hpp"

namespace sentinel {
namespace {

Record at_bank_rate(const Record& record) {
  if (std::abs(record.sample_rate - kBankSampleRate) < 1e-9) return record;
  return resample_half(record);  // UnsupportedRate for anything but 250 Hz
}

std::vector<double> distances_to_bank(std::span<const double> beat, const BeatBank& bank) {
  std::vector<double> d;
  d.reserve(bank.size());
  for (const auto& b : bank.beats) d.push_back(beat_distance(beat, b));
  return d;
}

std::pair<double, double> mean_and_sigma(std::span<const double> v) {
  return {dsp::mean(v), dsp::stddev(v)};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(BankKind kind) noexcept {
  switch (kind) {
    case BankKind::VentricularRepresentative: return "ventricular";
    case BankKind::StandardRepresentative: return "standard";
    case BankKind::SelfNonVentricular: return "self";
  }
  return "?";
}

WarpParams beat_warp(std::size_t len_a, std::size_t len_b) {
  const std::size_t diff = len_a > len_b ? len_a - len_b : len_b - len_a;
  return {std::max(kBankRadius, diff)};
}

double beat_distance(std::span<const double> a, std::span<const double> b) {
  return dtw_distance(a, b, beat_warp(a.size(), b.size()));
}

BeatBank extract_self_bank(const Record& record, std::size_t channel, double alarm_window_s) {
  if (channel >= record.channels.size()) throw Error(ErrorCode::MissingLead, "no channel " + std::to_string(channel));
  const Record rec = at_bank_rate(record);
  const double fs = rec.sample_rate;
  const std::size_t alarm = rec.alarm.alarm_index;
  if (static_cast<double>(alarm) / fs < kBankMinPreAlarmSeconds) {
    throw Error(ErrorCode::InsufficientData, "self bank needs 30 s before the alarm in " + record.name);
  }
  const auto section = static_cast<std::size_t>(std::llround(kBankSectionSeconds * fs));
  const auto skip = static_cast<std::size_t>(std::llround(alarm_window_s * fs));
  const auto min_len = static_cast<std::size_t>(std::llround(0.2 * fs));
  const auto max_len = static_cast<std::size_t>(std::llround(2.0 * fs));
  const auto signal = rec.channel(channel);

  BeatBank bank;
  bank.kind = BankKind::SelfNonVentricular;
  std::size_t end = alarm > skip ? alarm - skip : 0;
  while (end >= section && bank.size() < kSelfBankSize) {
    const std::size_t start = end - section;
    const auto seg = signal.subspan(start, section);
    end = start;
    try {
      if (!detect_invalid_segments(seg, ChannelKind::ECG, fs).empty()) continue;
      if (!is_clean(clean_window_metrics(seg, fs))) continue;
      const auto qrs = detect_qrs(seg, fs);
      if (qrs.indices.size() < 3) continue;
      const auto segments = beat_segments(qrs.indices);
      // Interior beats only, most recent first.
      for (std::size_t k = segments.size() - 2; k >= 1 && bank.size() < kSelfBankSize; --k) {
        const auto& s = segments[k];
        const std::size_t e = std::min(s.end, section);
        if (e - s.start < min_len || e - s.start > max_len) continue;
        try {
          bank.beats.push_back(znormalize(seg.subspan(s.start, e - s.start)));
          bank.provenance.push_back({record.name, start + s.start, start + e});
        } catch (const Error&) {
        }
      }
    } catch (const Error&) {
      continue;
    }
  }
  if (bank.size() < kSelfBankSize) {
    throw Error(ErrorCode::InsufficientCleanBeats, "found " + std::to_string(bank.size()) + " of " +
                                                       std::to_string(kSelfBankSize) + " clean beats in " +
                                                       record.name);
  }
  return bank;
}

std::vector<double> distance_histogram(std::span<const double> distances, std::span<const double> edges) {
  if (edges.size() < 2) throw Error(ErrorCode::InvalidArgument, "histogram needs at least two edges");
  std::vector<double> h(edges.size(), 0.0);  // last slot is the tail bin
  const std::size_t tail = edges.size() - 1;
  const double top = edges.back();
  for (double v : distances) {
    std::size_t bin;
    if (!(top > 0.0)) {
      bin = v <= 0.0 ? 0 : tail;
    } else if (v >= top) {
      bin = tail;
    } else {
      const auto it = std::upper_bound(edges.begin(), edges.end(), v);
      bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    }
    h[bin] += 1.0;
  }
  if (!distances.empty()) {
    for (auto& v : h) v /= static_cast<double>(distances.size());
  }
  return h;
}

std::vector<double> smooth_distribution(std::span<const double> q, double epsilon) {
  std::vector<double> out(q.begin(), q.end());
  double total = 0.0;
  for (auto& v : out) {
    v += epsilon;
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "distributions have " + std::to_string(p.size()) + " and " +
                                                  std::to_string(q.size()) + " bins");
  }
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw Error(ErrorCode::NotNormalized, "negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw Error(ErrorCode::NotNormalized, "distribution does not sum to 1");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

NoveltyStats bank_novelty_stats(const BeatBank& bank) {
  const std::size_t n = bank.size();
  if (n < 3) throw Error(ErrorCode::BankTooSmall, "bank has " + std::to_string(n) + " beats, need 3");
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  NoveltyStats s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i][j] = d[j][i] = beat_distance(bank.beats[i], bank.beats[j]);
      s.reference_distances.push_back(d[i][j]);
    }
  }

  std::vector<double> minima(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) m = std::min(m, d[i][j]);
    }
    minima[i] = m;
  }
  std::tie(s.mu_min, s.sigma_min) = mean_and_sigma(minima);

  const double top = 1.5 * *std::max_element(s.reference_distances.begin(), s.reference_distances.end());
  for (std::size_t k = 0; k <= kKlBins; ++k) s.bin_edges.push_back(top * static_cast<double>(k) / kKlBins);
  s.reference_histogram = smooth_distribution(distance_histogram(s.reference_distances, s.bin_edges));

  std::vector<double> kls(n);
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<double> own, rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != b) own.push_back(d[b][i]);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (i != b && j != b) rest.push_back(d[i][j]);
      }
    }
    kls[b] = kl_divergence(distance_histogram(own, s.bin_edges),
                           smooth_distribution(distance_histogram(rest, s.bin_edges)));
  }
  std::tie(s.mu_kl, s.sigma_kl) = mean_and_sigma(kls);
  return s;
}

BeatLabel classify_beat_vbank(std::span<const double> beat, const BeatBank& ventricular, const BeatBank& standard) {
  if (ventricular.empty() || standard.empty()) throw Error(ErrorCode::EmptyBank, "vbank classification needs both banks");
  double best = std::numeric_limits<double>::infinity();
  BeatLabel label = BeatLabel::Ventricular;
  for (const auto& b : ventricular.beats) {
    const double dist = beat_distance(beat, b);
    if (dist < best) best = dist;
  }
  for (const auto& b : standard.beats) {
    const double dist = beat_distance(beat, b);
    if (dist < best) {
      best = dist;
      label = BeatLabel::Normal;
    }
  }
  return label;
}

BeatLabel classify_beat_self_min(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats) {
  if (bank.empty()) throw Error(ErrorCode::EmptyBank, "self bank is empty");
  const auto d = distances_to_bank(beat, bank);
  const double m = *std::min_element(d.begin(), d.end());
  return m > stats.mu_min + stats.sigma_min ? BeatLabel::Ventricular : BeatLabel::Normal;
}

double beat_kl(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats) {
  if (bank.empty()) throw Error(ErrorCode::EmptyBank, "self bank is empty");
  return kl_divergence(distance_histogram(distances_to_bank(beat, bank), stats.bin_edges), stats.reference_histogram);
}

BeatLabel classify_beat_self_kl(std::span<const double> beat, const BeatBank& bank, const NoveltyStats& stats) {
  return beat_kl(beat, bank, stats) > stats.mu_kl + stats.sigma_kl ? BeatLabel::Ventricular : BeatLabel::Normal;
}

std::vector<BeatLabel> vt_labels_from_bank(const Record& record, std::size_t channel,
                                           std::span<const std::size_t> beat_indices, const BankClassifier& classifier) {
  if (channel >= record.channels.size()) throw Error(ErrorCode::MissingLead, "no channel " + std::to_string(channel));
  switch (classifier.method) {
    case BankMethod::VentricularBank:
      if (!classifier.ventricular || !classifier.reference) throw Error(ErrorCode::EmptyBank, "vbank needs two banks");
      break;
    case BankMethod::SelfMin:
    case BankMethod::SelfKl:
      if (!classifier.reference || !classifier.stats) throw Error(ErrorCode::EmptyBank, "self methods need a bank");
      break;
  }
  const Record rec = at_bank_rate(record);
  const double ratio = rec.sample_rate / record.sample_rate;
  std::vector<std::size_t> idx;
  for (auto i : beat_indices) {
    idx.push_back(std::min(rec.length() - 1, static_cast<std::size_t>(std::llround(static_cast<double>(i) * ratio))));
  }
  const auto segments = beat_segments(idx);
  const auto signal = rec.channel(channel);

  std::vector<BeatLabel> labels;
  for (const auto& s : segments) {
    const std::size_t e = std::min(s.end, signal.size());
    if (e <= s.start + 1) {
      labels.push_back(BeatLabel::Unknown);
      continue;
    }
    std::vector<double> beat;
    try {
      beat = znormalize(dsp::fill_missing(signal.subspan(s.start, e - s.start)));
    } catch (const Error&) {
      labels.push_back(BeatLabel::Unknown);
      continue;
    }
    switch (classifier.method) {
      case BankMethod::VentricularBank:
        labels.push_back(classify_beat_vbank(beat, *classifier.ventricular, *classifier.reference));
        break;
      case BankMethod::SelfMin:
        labels.push_back(classify_beat_self_min(beat, *classifier.reference, *classifier.stats));
        break;
      case BankMethod::SelfKl:
        labels.push_back(classify_beat_self_kl(beat, *classifier.reference, *classifier.stats));
        break;
    }
  }
  return labels;
}

void write_beat_file(const std::filesystem::path& path, std::span<const double> beat, BeatLabel label,
                     double sample_rate) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "fs=" << sample_rate << " label=" << (label == BeatLabel::Ventricular ? "V" : "N") << '\n';
  out << std::setprecision(17);
  for (double v : beat) out << v << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

BeatFile read_beat_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, path.string() + ": empty beat file");
  BeatFile bf;
  bool have_fs = false, have_label = false;
  std::istringstream head(line);
  std::string tok;
  while (head >> tok) {
    if (tok.rfind("fs=", 0) == 0) {
      const auto v = tok.substr(3);
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), bf.sample_rate);
      if (ec != std::errc() || p != v.data() + v.size() || !(bf.sample_rate > 0.0)) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": bad fs");
      }
      have_fs = true;
    } else if (tok == "label=V") {
      bf.label = BeatLabel::Ventricular;
      have_label = true;
    } else if (tok == "label=N") {
      bf.label = BeatLabel::Normal;
      have_label = true;
    } else {
      throw Error(ErrorCode::MalformedHeader, path.string() + ": unexpected token '" + tok + "'");
    }
  }
  if (!have_fs || !have_label) throw Error(ErrorCode::MalformedHeader, path.string() + ": header needs fs= and label=");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    double v;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) {
      throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
    bf.samples.push_back(v);
  }
  if (bf.samples.empty()) throw Error(ErrorCode::EmptySequence, path.string() + ": no samples");
  return bf;
}

BankDirectory load_bank_directory(const std::filesystem::path& directory) {
  std::error_code ec;
  std::vector<std::filesystem::path> files;
  for (std::filesystem::directory_iterator it(directory, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().filename().string().front() != '.') files.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + directory.string());
  std::sort(files.begin(), files.end());

  BankDirectory out;
  out.ventricular.kind = BankKind::VentricularRepresentative;
  out.standard.kind = BankKind::StandardRepresentative;
  for (const auto& f : files) {
    const auto bf = read_beat_file(f);
    if (std::abs(bf.sample_rate - kBankSampleRate) > 1e-9) {
      throw Error(ErrorCode::UnsupportedRate, f.string() + ": beats must be sampled at 125 Hz");
    }
    auto& bank = bf.label == BeatLabel::Ventricular ? out.ventricular : out.standard;
    bank.beats.push_back(znormalize(bf.samples));
    bank.provenance.push_back({f.filename().string(), 0, bf.samples.size()});
  }
  return out;
}

void write_bank_directory(const BeatBank& bank, const std::filesystem::path& directory, BeatLabel label) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory.string());
  const std::string prefix = label == BeatLabel::Ventricular ? "v_" : "n_";
  for (std::size_t i = 0; i < bank.size(); ++i) {
    std::string n = std::to_string(i);
    write_beat_file(directory / (prefix + std::string(3 - std::min<std::size_t>(3, n.size()), '0') + n + ".txt"),
                    bank.beats[i], label);
  }
}

}  // namespace sentinel
