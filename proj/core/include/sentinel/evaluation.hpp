#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentinel/alarm_logic.hpp"
#include "sentinel/record_io.hpp"
#include "sentinel/verdict.hpp"

namespace sentinel {

/// Positive class is TrueAlarm: suppressing a true alarm is a false negative.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

/// LengthMismatch, UnknownTruth.
ConfusionCounts accumulate(std::span<const Truth> predictions, std::span<const std::optional<Truth>> truths);

/// (tp + tn) / (tp + tn + fp + 5 fn). EmptyCounts when all counts are zero.
double challenge_score(const ConfusionCounts& counts);

/// A metric is nullopt when its denominator is zero.
struct MetricRow {
  ConfusionCounts counts;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> f1;
  double challenge_score = 0.0;
};

/// EmptyCounts when all counts are zero.
MetricRow metric_suite(const ConfusionCounts& counts);

struct RecordResult {
  std::string record;
  Arrhythmia arrhythmia = Arrhythmia::Asystole;
  std::optional<Truth> truth;
  Truth prediction = Truth::TrueAlarm;
  std::optional<Verdict> verdict;
  std::string error;  ///< non-empty when classification failed and the alarm was kept
  double latency_ms = 0.0;
};

struct MetricsReport {
  MetricRow overall;
  std::vector<std::pair<Arrhythmia, MetricRow>> per_arrhythmia;  ///< classes present, enum order
};

/// Per-class rows plus the pooled overall row. UnknownTruth, EmptyCounts.
MetricsReport per_arrhythmia_report(std::span<const RecordResult> results);

struct LatencyStats {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};
LatencyStats latency_stats(std::span<const RecordResult> results);

/// Train/test membership as manifest row indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, first two thirds (rounded) train, rest test; both lists
/// sorted so manifest order is preserved.
Split random_split(std::size_t count, std::uint64_t seed = 2015);
/// CSV `record,set` (set = train|test) matched on the record stem.
/// Manifest rows not listed are left out. MalformedRow on bad rows.
Split load_split(const std::filesystem::path& path, const Manifest& manifest);

/// Rows of the given arrhythmia, order kept.
Manifest filter_manifest(const Manifest& manifest, Arrhythmia arrhythmia);

struct EvaluationOptions {
  Method method = Method::Improved;
  TestConfig config;
  ClassifierResources resources;
  std::size_t threads = 0;           ///< 0 = hardware concurrency, capped by ALARM_SENTINEL_THREADS
  std::optional<double> alarm_at_s;  ///< overrides every record's alarm position
};

/// Worker count after applying ALARM_SENTINEL_THREADS.
std::size_t worker_count(std::size_t requested);

/// Loads a manifest row, applying the manifest's arrhythmia and label.
Record load_manifest_record(const ManifestEntry& entry, std::optional<double> alarm_at_s = std::nullopt);

/// Classifies every row in parallel; results follow manifest order. A row
/// that fails to load or classify keeps its alarm and records the error.
std::vector<RecordResult> evaluate_manifest(const Manifest& manifest, const EvaluationOptions& options);

/// Corpus entries for the full-signal method from labelled rows.
TrainingCorpus build_corpus(const Manifest& manifest, const std::string& lead = "II", std::size_t threads = 0);

}  // namespace sentinel
