#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "sentinel/beat_banks.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/verdict.hpp"

/// JSON and CSV views of verdicts and metrics. Undefined metrics are null.
namespace sentinel {

nlohmann::json to_json(const Verdict& verdict);
nlohmann::json to_json(const ConfusionCounts& counts);
nlohmann::json to_json(const MetricRow& row);
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const RecordResult& result);
nlohmann::json to_json(const LatencyStats& stats);
nlohmann::json to_json(const NoveltyStats& stats, bool include_distances = false);

/// The full evaluation document: method, per-record results, metrics and
/// latency.
nlohmann::json evaluation_report(std::string_view method, std::span<const RecordResult> results,
                                 const MetricsReport& metrics);

/// One row per arrhythmia plus Overall; columns are the six metrics and the
/// four counts. Undefined metrics print as "n/a".
std::string metrics_csv(const MetricsReport& report);

/// Fixed-width text table of the same content for terminals.
std::string metrics_table(const MetricsReport& report);

}  // namespace sentinel
