#include "sentinel/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sentinel/dsp.hpp"
#include "sentinel/error.hpp"

namespace sentinel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::IoFailure, "truncated corpus cache");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::IoFailure, "truncated corpus cache");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

std::vector<double> znormalize(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "z-normalization needs at least two samples");
  const double mu = dsp::mean(x);
  const double sd = dsp::stddev(x);
  if (!(sd > 0.0) || !std::isfinite(sd)) throw Error(ErrorCode::ZeroVariance, "constant sequence");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / sd;
  return out;
}

double dtw_distance(std::span<const double> a, std::span<const double> b, WarpParams params) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySequence, "DTW input is empty");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t diff = n > m ? n - m : m - n;
  if (diff > params.radius) {
    throw Error(ErrorCode::BandInfeasible, "length difference " + std::to_string(diff) + " exceeds radius " +
                                               std::to_string(params.radius));
  }
  const std::size_t r = std::min(params.radius, std::max(n, m));
  const std::size_t width = 2 * r + 1;

  // Row i stores column j at slot k = j - i + r; the previous row's slot
  // for the same column is k + 1.
  std::vector<double> prev(width + 1, kInf);
  std::vector<double> cur(width + 1, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    const std::size_t j_lo = i > r ? i - r : 0;
    const std::size_t j_hi = std::min(m - 1, i + r);
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const std::size_t k = j + r - i;
      const double d = a[i] - b[j];
      const double cost = d * d;
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = prev[k + 1];                      // (i-1, j)
        if (k > 0) best = std::min(best, cur[k - 1]);  // (i, j-1)
        best = std::min(best, prev[k]);          // (i-1, j-1)
      }
      cur[k] = cost + best;
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[m - 1 + r - (n - 1)]);
}

TrainingCorpus TrainingCorpus::filtered(const std::string& lead, Arrhythmia arrhythmia) const {
  TrainingCorpus out;
  for (const auto& e : entries) {
    if (e.lead == lead && e.arrhythmia == arrhythmia) out.entries.push_back(e);
  }
  return out;
}

Neighbor nearest_neighbor(std::span<const double> test, const TrainingCorpus& corpus, WarpParams params) {
  if (corpus.entries.empty()) throw Error(ErrorCode::EmptyCorpus, "no training entries");
  Neighbor best{0, kInf, corpus.entries.front().label};
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const double d = dtw_distance(test, corpus.entries[i].sequence, params);
    if (d < best.distance) best = {i, d, corpus.entries[i].label};
  }
  return best;
}

Truth nn1_label(std::span<const double> test, const TrainingCorpus& corpus, WarpParams params) {
  return nearest_neighbor(test, corpus, params).label;
}

std::vector<double> alarm_signal(const Record& record, const std::string& lead) {
  const auto channel = record.find_channel(lead);
  if (!channel) throw Error(ErrorCode::MissingLead, "record " + record.name + " has no lead " + lead);
  Record source;
  if (std::abs(record.sample_rate - kDtwSampleRate) < 1e-9) {
    source = pre_alarm_window(record, kDtwSignalSeconds);
  } else {
    // Cut generously before halving so the filter edges stay outside the window.
    const double lead_in = std::min(kDtwSignalSeconds + 2.0, static_cast<double>(record.alarm.alarm_index) /
                                                                 record.sample_rate);
    if (lead_in < kDtwSignalSeconds) {
      throw Error(ErrorCode::InsufficientData, "fewer than 10 s before the alarm in " + record.name);
    }
    source = pre_alarm_window(resample_half(pre_alarm_window(record, lead_in)), kDtwSignalSeconds);
  }
  return znormalize(dsp::fill_missing(source.channel(*channel)));
}

CorpusEntry make_corpus_entry(const Record& record, const std::string& lead) {
  if (!record.alarm.truth) throw Error(ErrorCode::UnknownTruth, "record " + record.name + " is unlabelled");
  CorpusEntry e;
  e.sequence = alarm_signal(record, lead);
  e.label = *record.alarm.truth;
  e.lead = lead;
  e.arrhythmia = record.alarm.arrhythmia;
  e.record = record.name;
  return e;
}

Verdict classify_full_signal(const Record& record, const TrainingCorpus& corpus, WarpParams params,
                             const std::string& lead) {
  const auto pool = corpus.filtered(lead, record.alarm.arrhythmia);
  if (pool.empty()) {
    throw Error(ErrorCode::EmptyCorpus,
                "no training entries for lead " + lead + " and " + std::string(to_string(record.alarm.arrhythmia)));
  }
  const auto test = alarm_signal(record, lead);
  const auto nn = nearest_neighbor(test, pool, params);
  Verdict v;
  v.decision = nn.label;
  v.arrhythmia = record.alarm.arrhythmia;
  ChannelEvidence ev;
  ev.channel = lead;
  ev.test = "dtw-nn1";
  ev.positive = nn.label == Truth::TrueAlarm;
  ev.witnesses = {{"distance", nn.distance},
                  {"radius", params.radius == WarpParams::kUnconstrained ? -1.0 : static_cast<double>(params.radius)},
                  {"neighbor_index", static_cast<double>(nn.index)}};
  v.evidence.push_back(std::move(ev));
  v.notes.push_back("nearest training record: " + pool.entries[nn.index].record);
  return v;
}

void save_corpus(const TrainingCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(corpus.entries.size()));
  for (const auto& e : corpus.entries) {
    const char label = e.label == Truth::TrueAlarm ? 1 : 0;
    out.write(&label, 1);
    put_u32(out, static_cast<std::uint32_t>(e.sequence.size()));
    for (double v : e.sequence) put_f64(out, v);
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

TrainingCorpus load_corpus(const std::filesystem::path& path, const std::string& lead, Arrhythmia arrhythmia) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  TrainingCorpus corpus;
  const auto count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    char label = 0;
    if (!in.read(&label, 1)) throw Error(ErrorCode::IoFailure, "truncated corpus cache");
    if (label != 0 && label != 1) throw Error(ErrorCode::IoFailure, "bad label byte in corpus cache");
    CorpusEntry e;
    e.label = label == 1 ? Truth::TrueAlarm : Truth::FalseAlarm;
    e.lead = lead;
    e.arrhythmia = arrhythmia;
    e.record = "#" + std::to_string(i);
    const auto len = get_u32(in);
    e.sequence.reserve(len);
    for (std::uint32_t k = 0; k < len; ++k) e.sequence.push_back(get_f64(in));
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

}  // namespace sentinel
