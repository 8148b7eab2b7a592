#include "sentinel/report.hpp"

#include <cstdio>
#include <sstream>

namespace sentinel {
namespace {

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string cell(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

struct NamedRow {
  std::string name;
  const MetricRow* row;
};

std::vector<NamedRow> rows(const MetricsReport& report) {
  std::vector<NamedRow> out;
  for (const auto& [a, row] : report.per_arrhythmia) out.push_back({std::string(to_string(a)), &row});
  out.push_back({"Overall", &report.overall});
  return out;
}

}  // namespace

nlohmann::json to_json(const Verdict& v) {
  nlohmann::json evidence = nlohmann::json::array();
  for (const auto& e : v.evidence) {
    nlohmann::json w = nlohmann::json::object();
    for (const auto& x : e.witnesses) w[x.name] = x.value;
    evidence.push_back({{"channel", e.channel}, {"test", e.test}, {"positive", e.positive}, {"witnesses", w}});
  }
  return {{"decision", to_string(v.decision)},
          {"gate_fired", v.gate_fired},
          {"method", v.method},
          {"arrhythmia", to_string(v.arrhythmia)},
          {"evidence", evidence},
          {"notes", v.notes}};
}

nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

nlohmann::json to_json(const MetricRow& r) {
  return {{"counts", to_json(r.counts)},
          {"sensitivity", optional_number(r.sensitivity)},
          {"specificity", optional_number(r.specificity)},
          {"ppv", optional_number(r.ppv)},
          {"npv", optional_number(r.npv)},
          {"f1", optional_number(r.f1)},
          {"challenge_score", r.challenge_score}};
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [a, row] : report.per_arrhythmia) per[std::string(to_string(a))] = to_json(row);
  return {{"overall", to_json(report.overall)}, {"per_arrhythmia", per}};
}

nlohmann::json to_json(const RecordResult& r) {
  nlohmann::json j = {{"record", r.record},
                      {"arrhythmia", to_string(r.arrhythmia)},
                      {"truth", r.truth ? nlohmann::json(to_string(*r.truth)) : nlohmann::json()},
                      {"prediction", to_string(r.prediction)},
                      {"latency_ms", r.latency_ms}};
  if (r.verdict) j["verdict"] = to_json(*r.verdict);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

nlohmann::json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}};
}

nlohmann::json to_json(const NoveltyStats& s, bool include_distances) {
  nlohmann::json j = {{"mu_min", s.mu_min},
                      {"sigma_min", s.sigma_min},
                      {"mu_kl", s.mu_kl},
                      {"sigma_kl", s.sigma_kl},
                      {"bin_edges", s.bin_edges},
                      {"reference_histogram", s.reference_histogram}};
  if (include_distances) j["reference_distances"] = s.reference_distances;
  return j;
}

nlohmann::json evaluation_report(std::string_view method, std::span<const RecordResult> results,
                                 const MetricsReport& metrics) {
  nlohmann::json records = nlohmann::json::array();
  std::size_t errors = 0;
  for (const auto& r : results) {
    records.push_back(to_json(r));
    if (!r.error.empty()) ++errors;
  }
  return {{"method", method},
          {"record_count", results.size()},
          {"error_count", errors},
          {"records", records},
          {"metrics", to_json(metrics)},
          {"latency", to_json(latency_stats(results))}};
}

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "arrhythmia,sensitivity,specificity,ppv,npv,f1,challenge_score,tp,tn,fp,fn\n";
  for (const auto& [name, row] : rows(report)) {
    out << name << ',' << cell(row->sensitivity) << ',' << cell(row->specificity) << ',' << cell(row->ppv) << ','
        << cell(row->npv) << ',' << cell(row->f1) << ',' << cell(row->challenge_score) << ',' << row->counts.tp << ','
        << row->counts.tn << ',' << row->counts.fp << ',' << row->counts.fn << '\n';
  }
  return out.str();
}

std::string metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-30s %6s %6s %6s %6s %6s %6s %5s %5s %5s %5s\n", "arrhythmia", "sens", "spec", "ppv",
                "npv", "f1", "score", "tp", "tn", "fp", "fn");
  out << buf;
  for (const auto& [name, row] : rows(report)) {
    std::snprintf(buf, sizeof buf, "%-30s %6s %6s %6s %6s %6s %6s %5zu %5zu %5zu %5zu\n", name.c_str(),
                  cell(row->sensitivity).c_str(), cell(row->specificity).c_str(), cell(row->ppv).c_str(),
                  cell(row->npv).c_str(), cell(row->f1).c_str(), cell(row->challenge_score).c_str(), row->counts.tp,
                  row->counts.tn, row->counts.fp, row->counts.fn);
    out << buf;
  }
  return out.str();
}

}  // namespace sentinel
