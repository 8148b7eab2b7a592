#include "sentinel/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "sentinel/dtw.hpp"
#include "sentinel/error.hpp"

namespace sentinel {
namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string stem_of(const std::filesystem::path& p) { return p.stem().string(); }

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts accumulate(std::span<const Truth> predictions, std::span<const std::optional<Truth>> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                               std::to_string(truths.size()) + " truths");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!truths[i]) throw Error(ErrorCode::UnknownTruth, "row " + std::to_string(i) + " has no label");
    const bool pred = predictions[i] == Truth::TrueAlarm;
    const bool truth = *truths[i] == Truth::TrueAlarm;
    if (pred && truth) ++c.tp;
    if (!pred && truth) ++c.fn;
    if (pred && !truth) ++c.fp;
    if (!pred && !truth) ++c.tn;
  }
  return c;
}

double challenge_score(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorCode::EmptyCounts, "no counts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.tp + c.tn + c.fp + 5 * c.fn);
}

MetricRow metric_suite(const ConfusionCounts& c) {
  MetricRow r;
  r.counts = c;
  r.challenge_score = challenge_score(c);
  r.sensitivity = ratio(c.tp, c.tp + c.fn);
  r.specificity = ratio(c.tn, c.tn + c.fp);
  r.ppv = ratio(c.tp, c.tp + c.fp);
  r.npv = ratio(c.tn, c.tn + c.fn);
  if (r.ppv && r.sensitivity && *r.ppv + *r.sensitivity > 0.0) {
    r.f1 = 2.0 * *r.ppv * *r.sensitivity / (*r.ppv + *r.sensitivity);
  }
  return r;
}

MetricsReport per_arrhythmia_report(std::span<const RecordResult> results) {
  MetricsReport report;
  ConfusionCounts pooled;
  for (Arrhythmia a : kAllArrhythmias) {
    std::vector<Truth> preds;
    std::vector<std::optional<Truth>> truths;
    for (const auto& r : results) {
      if (r.arrhythmia != a) continue;
      preds.push_back(r.prediction);
      truths.push_back(r.truth);
    }
    if (preds.empty()) continue;
    const auto c = accumulate(preds, truths);
    pooled += c;
    report.per_arrhythmia.emplace_back(a, metric_suite(c));
  }
  report.overall = metric_suite(pooled);
  return report;
}

LatencyStats latency_stats(std::span<const RecordResult> results) {
  LatencyStats s;
  if (results.empty()) return s;
  std::vector<double> v;
  for (const auto& r : results) v.push_back(r.latency_ms);
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += x;
  s.mean_ms = total / static_cast<double>(v.size());
  s.max_ms = v.back();
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  s.p95_ms = v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
  return s;
}

Split random_split(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  // Fisher-Yates on the raw engine output keeps the split identical
  // across standard libraries.
  std::mt19937_64 engine(seed);
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine() % i);
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = (2 * count + 1) / 3;
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split load_split(const std::filesystem::path& path, const Manifest& manifest) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) index[stem_of(manifest.entries[i].record)] = i;

  Split s;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line_no));
    const auto name = trim(std::string_view(body).substr(0, comma));
    const auto set = trim(std::string_view(body).substr(comma + 1));
    if (first && name == "record") {
      first = false;
      continue;
    }
    first = false;
    const auto it = index.find(stem_of(name));
    if (it == index.end()) continue;
    if (set == "train") {
      s.train.push_back(it->second);
    } else if (set == "test") {
      s.test.push_back(it->second);
    } else {
      throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": set must be train or test");
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Manifest filter_manifest(const Manifest& manifest, Arrhythmia arrhythmia) {
  Manifest out;
  for (const auto& e : manifest.entries) {
    if (e.arrhythmia == arrhythmia) out.entries.push_back(e);
  }
  return out;
}

std::size_t worker_count(std::size_t requested) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ALARM_SENTINEL_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

Record load_manifest_record(const ManifestEntry& entry, std::optional<double> alarm_at_s) {
  Record r = load_record(entry.record);
  r.alarm.arrhythmia = entry.arrhythmia;
  if (entry.truth) r.alarm.truth = entry.truth;
  if (alarm_at_s) {
    const auto idx = static_cast<std::size_t>(std::llround(std::max(0.0, *alarm_at_s) * r.sample_rate));
    r.alarm.alarm_index = std::min(idx, r.length());
  }
  return r;
}

std::vector<RecordResult> evaluate_manifest(const Manifest& manifest, const EvaluationOptions& options) {
  options.config.validate();
  std::vector<RecordResult> results(manifest.entries.size());
  parallel_for(manifest.entries.size(), worker_count(options.threads), [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    RecordResult& r = results[i];
    r.record = stem_of(entry.record);
    r.arrhythmia = entry.arrhythmia;
    r.truth = entry.truth;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Record rec = load_manifest_record(entry, options.alarm_at_s);
      if (!r.truth) r.truth = rec.alarm.truth;
      r.verdict = classify_alarm(rec, options.method, options.config, options.resources);
      r.prediction = r.verdict->decision;
    } catch (const std::exception& e) {
      r.prediction = Truth::TrueAlarm;
      r.error = e.what();
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return results;
}

TrainingCorpus build_corpus(const Manifest& manifest, const std::string& lead, std::size_t threads) {
  std::vector<std::optional<CorpusEntry>> entries(manifest.entries.size());
  std::mutex failure_mutex;
  std::exception_ptr failure;
  parallel_for(manifest.entries.size(), worker_count(threads), [&](std::size_t i) {
    try {
      entries[i] = make_corpus_entry(load_manifest_record(manifest.entries[i]), lead);
    } catch (const Error& e) {
      // Records without the lead or without enough signal are skipped.
      if (e.code() != ErrorCode::MissingLead && e.code() != ErrorCode::InsufficientData &&
          e.code() != ErrorCode::ZeroVariance) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  });
  if (failure) std::rethrow_exception(failure);
  TrainingCorpus corpus;
  for (auto& e : entries) {
    if (e) corpus.entries.push_back(std::move(*e));
  }
  return corpus;
}

}  // namespace sentinel
