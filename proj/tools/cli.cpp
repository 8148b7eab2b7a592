#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/alarm_logic.hpp"
#include "sentinel/beat_banks.hpp"
#include "sentinel/dtw.hpp"
#include "sentinel/error.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/record_io.hpp"
#include "sentinel/report.hpp"
#include "sentinel/synthkit.hpp"

namespace sentinel::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassifyArgs {
  std::string record;
  std::string method = "improved";
  std::string config;
  std::string bank_dir;
  std::string train_manifest;
  std::string corpus;
  std::vector<std::string> annotations;
  std::optional<double> alarm_at_s;
};

struct EvaluateArgs {
  std::string manifest;
  std::string method = "improved";
  std::string config;
  std::string bank_dir;
  std::string split;
  std::uint64_t split_seed = 2015;
  std::string out;
  std::string csv;
  std::string corpus_out;
  std::optional<double> latency_ms;
  std::optional<double> alarm_at_s;
  std::size_t threads = 0;
};

struct BankArgs {
  std::string record;
  std::string out;
  std::string lead = "II";
  std::string bank_dir;
  std::string label = "V";
  std::size_t count = 20;
  std::uint64_t seed = 1;
  bool distances = false;
};

Method method_or_usage(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw UsageError("unknown method '" + name + "'");
  return *m;
}

TestConfig config_from(const std::string& path) { return path.empty() ? TestConfig{} : load_config(path); }

std::size_t annotation_default_channel(const Record& r) {
  if (const auto ii = r.find_channel("II")) return *ii;
  for (std::size_t c = 0; c < r.channels.size(); ++c) {
    if (r.channels[c].kind == ChannelKind::ECG) return c;
  }
  throw Error(ErrorCode::MissingLead, "record " + r.name + " has no ECG channel for annotations");
}

BeatAnnotation load_annotation_arg(const std::string& arg, const Record& r) {
  std::string path = arg;
  std::optional<std::size_t> channel;
  if (const auto colon = arg.find(':'); colon != std::string::npos) {
    if (const auto c = r.find_channel(arg.substr(0, colon))) {
      channel = c;
      path = arg.substr(colon + 1);
    }
  }
  auto ann = import_annotations(path, r.length());
  ann.channel = channel ? *channel : annotation_default_channel(r);
  return ann;
}

std::filesystem::path header_path(std::string p) {
  if (std::filesystem::path(p).extension() != ".hea") p += ".hea";
  return p;
}

int classify(const ClassifyArgs& a, std::ostream& out) {
  const Method method = method_or_usage(a.method);
  const TestConfig config = config_from(a.config);
  if (method == Method::DtwVbank && a.bank_dir.empty()) throw UsageError("dtw-vbank needs --bank-dir");
  if (method == Method::DtwFull && a.train_manifest.empty() && a.corpus.empty()) {
    throw UsageError("dtw-full needs --train-manifest or --corpus");
  }
  Record record = load_record(header_path(a.record));
  if (a.alarm_at_s) {
    record.alarm.alarm_index =
        std::min(record.length(), static_cast<std::size_t>(std::llround(std::max(0.0, *a.alarm_at_s) * record.sample_rate)));
  }

  ClassifierResources res;
  for (const auto& arg : a.annotations) res.annotations.push_back(load_annotation_arg(arg, record));
  TrainingCorpus corpus;
  BankDirectory banks;
  if (method == Method::DtwFull) {
    corpus = a.corpus.empty() ? build_corpus(load_manifest(a.train_manifest))
                              : load_corpus(a.corpus, "II", record.alarm.arrhythmia);
    res.corpus = &corpus;
  }
  if (method == Method::DtwVbank) {
    banks = load_bank_directory(a.bank_dir);
    res.ventricular_bank = &banks.ventricular;
    res.standard_bank = &banks.standard;
  }
  const Verdict v = classify_alarm(record, method, config, res);
  auto j = to_json(v);
  j["record"] = record.name;
  out << j.dump(2) << '\n';
  return v.decision == Truth::TrueAlarm ? kTrueAlarm : kFalseAlarm;
}

int evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  EvaluationOptions opt;
  opt.method = method_or_usage(a.method);
  opt.config = config_from(a.config);
  opt.threads = a.threads;
  opt.alarm_at_s = a.alarm_at_s;
  if (opt.method == Method::DtwVbank && a.bank_dir.empty()) throw UsageError("dtw-vbank needs --bank-dir");

  Manifest manifest = load_manifest(a.manifest);
  for (const auto& e : manifest.entries) {
    if (!e.truth) throw Error(ErrorCode::UnknownTruth, "manifest row " + e.record.string() + " has no label");
  }

  TrainingCorpus corpus;
  BankDirectory banks;
  if (is_dtw_method(opt.method)) {
    manifest = filter_manifest(manifest, Arrhythmia::VTach);
    const Split split = a.split.empty() ? random_split(manifest.entries.size(), a.split_seed)
                                        : load_split(a.split, manifest);
    Manifest train, test;
    for (auto i : split.train) train.entries.push_back(manifest.entries[i]);
    for (auto i : split.test) test.entries.push_back(manifest.entries[i]);
    err << "split: " << train.entries.size() << " train, " << test.entries.size() << " test\n";
    if (opt.method == Method::DtwFull) {
      corpus = build_corpus(train, "II", a.threads);
      if (!a.corpus_out.empty()) save_corpus(corpus, a.corpus_out);
      opt.resources.corpus = &corpus;
    }
    manifest = std::move(test);
  }
  if (opt.method == Method::DtwVbank) {
    banks = load_bank_directory(a.bank_dir);
    opt.resources.ventricular_bank = &banks.ventricular;
    opt.resources.standard_bank = &banks.standard;
  }
  if (manifest.entries.empty()) throw Error(ErrorCode::EmptyCounts, "nothing to evaluate");

  const auto results = evaluate_manifest(manifest, opt);
  const auto metrics = per_arrhythmia_report(results);
  const auto report = evaluation_report(to_string(opt.method), results, metrics);
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + a.out);
    f << report.dump(2) << '\n';
  }
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + a.csv);
    f << metrics_csv(metrics);
  }
  out << metrics_table(metrics);
  const auto lat = latency_stats(results);
  out << "latency ms: mean " << lat.mean_ms << ", p95 " << lat.p95_ms << ", max " << lat.max_ms << '\n';
  for (const auto& r : results) {
    if (!r.error.empty()) err << "warning: " << r.record << ": " << r.error << " (alarm kept)\n";
  }
  if (a.latency_ms && lat.max_ms > *a.latency_ms) {
    err << "latency budget exceeded: " << lat.max_ms << " ms > " << *a.latency_ms << " ms\n";
    return kLatencyExceeded;
  }
  return kFalseAlarm;
}

int bank_build_self(const BankArgs& a, std::ostream& out) {
  const Record record = load_record(header_path(a.record));
  const auto ch = record.find_channel(a.lead);
  if (!ch) throw Error(ErrorCode::MissingLead, "record " + record.name + " has no lead " + a.lead);
  const auto bank = extract_self_bank(record, *ch);
  write_bank_directory(bank, a.out, BeatLabel::Normal);
  out << "wrote " << bank.size() << " beats to " << a.out << '\n';
  return kFalseAlarm;
}

int bank_inspect(const BankArgs& a, std::ostream& out) {
  const auto dir = load_bank_directory(a.bank_dir);
  nlohmann::json j = {{"ventricular_beats", dir.ventricular.size()}, {"standard_beats", dir.standard.size()}};
  if (dir.standard.size() >= 3) j["standard"] = to_json(bank_novelty_stats(dir.standard), a.distances);
  if (dir.ventricular.size() >= 3) j["ventricular"] = to_json(bank_novelty_stats(dir.ventricular), a.distances);
  out << j.dump(2) << '\n';
  return kFalseAlarm;
}

int bank_surrogate(const BankArgs& a, std::ostream& out) {
  if (a.label != "V" && a.label != "N") throw UsageError("--label must be V or N");
  const auto label = a.label == "V" ? BeatLabel::Ventricular : BeatLabel::Normal;
  BeatBank bank;
  for (auto& b : synth::surrogate_beats(label, a.count, a.seed)) bank.beats.push_back(std::move(b));
  write_bank_directory(bank, a.out, label);
  out << "wrote " << bank.size() << " " << a.label << " beats to " << a.out << '\n';
  return kFalseAlarm;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"False arrhythmia alarm reduction for ICU monitor records"};
  app.require_subcommand(1);

  ClassifyArgs ca;
  auto* classify_cmd = app.add_subcommand("classify", "Classify one alarm record (exit 0 false alarm, 1 true alarm)");
  classify_cmd->add_option("record", ca.record, "Record header path (.hea optional)")->required();
  classify_cmd->add_option("--method", ca.method, "baseline|improved|dtw-full|dtw-vbank|dtw-self-min|dtw-self-kl");
  classify_cmd->add_option("--config", ca.config, "key = value file overriding test thresholds");
  classify_cmd->add_option("--bank-dir", ca.bank_dir, "Beat bank directory (dtw-vbank)");
  classify_cmd->add_option("--train-manifest", ca.train_manifest, "Training manifest (dtw-full)");
  classify_cmd->add_option("--corpus", ca.corpus, "Corpus cache file (dtw-full)");
  classify_cmd->add_option("--annotations", ca.annotations, "[channel:]path beat annotation file");
  classify_cmd->add_option("--alarm-at-s", ca.alarm_at_s, "Override the alarm position in seconds");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Classify every manifest row and report metrics");
  eval_cmd->add_option("--manifest", ea.manifest, "CSV record,arrhythmia,label")->required();
  eval_cmd->add_option("--method", ea.method, "Classification method");
  eval_cmd->add_option("--config", ea.config, "key = value file overriding test thresholds");
  eval_cmd->add_option("--bank-dir", ea.bank_dir, "Beat bank directory (dtw-vbank)");
  eval_cmd->add_option("--split", ea.split, "CSV record,set with set train|test (DTW methods)");
  eval_cmd->add_option("--split-seed", ea.split_seed, "Seed for the random 2:1 split");
  eval_cmd->add_option("--out", ea.out, "JSON report path");
  eval_cmd->add_option("--csv", ea.csv, "Metric table CSV path");
  eval_cmd->add_option("--save-corpus", ea.corpus_out, "Write the dtw-full training corpus cache");
  eval_cmd->add_option("--assert-latency-ms", ea.latency_ms, "Fail (exit 4) if any record exceeds this");
  eval_cmd->add_option("--alarm-at-s", ea.alarm_at_s, "Override every alarm position in seconds");
  eval_cmd->add_option("--threads", ea.threads, "Worker threads (0 = all cores)");

  BankArgs ba;
  auto* bank_cmd = app.add_subcommand("bank", "Build or inspect beat banks");
  bank_cmd->require_subcommand(1);
  auto* build_cmd = bank_cmd->add_subcommand("build-self", "Extract the patient's 20-beat self bank");
  build_cmd->add_option("--record", ba.record, "Record header path")->required();
  build_cmd->add_option("--out", ba.out, "Output directory")->required();
  build_cmd->add_option("--lead", ba.lead, "ECG lead name");
  auto* inspect_cmd = bank_cmd->add_subcommand("inspect", "Print novelty statistics of a bank directory");
  inspect_cmd->add_option("--bank-dir", ba.bank_dir, "Bank directory")->required();
  inspect_cmd->add_flag("--distances", ba.distances, "Include all pairwise distances");
  auto* surrogate_cmd = bank_cmd->add_subcommand("surrogate", "Write synthetic template beats");
  surrogate_cmd->add_option("--out", ba.out, "Output directory")->required();
  surrogate_cmd->add_option("--label", ba.label, "V or N");
  surrogate_cmd->add_option("--count", ba.count, "Number of beats");
  surrogate_cmd->add_option("--seed", ba.seed, "Generator seed");

  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the 50-record synthetic suite");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  std::string scan_dir, scan_out;
  auto* manifest_cmd = app.add_subcommand("manifest", "Write a manifest from the headers in a directory");
  manifest_cmd->add_option("--dir", scan_dir, "Directory of .hea files")->required();
  manifest_cmd->add_option("--out", scan_out, "Manifest path (default <dir>/manifest.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kError;
  }

  try {
    if (classify_cmd->parsed()) return classify(ca, out);
    if (eval_cmd->parsed()) return evaluate(ea, out, err);
    if (build_cmd->parsed()) return bank_build_self(ba, out);
    if (inspect_cmd->parsed()) return bank_inspect(ba, out);
    if (surrogate_cmd->parsed()) return bank_surrogate(ba, out);
    if (synth_cmd->parsed()) {
      out << synth::generate_suite(synth_seed, synth_out).string() << '\n';
      return kFalseAlarm;
    }
    if (manifest_cmd->parsed()) {
      const std::filesystem::path path = scan_out.empty() ? std::filesystem::path(scan_dir) / "manifest.csv"
                                                          : std::filesystem::path(scan_out);
      const auto m = scan_header_directory(scan_dir);
      write_manifest(m, path);
      out << "wrote " << m.entries.size() << " rows to " << path.string() << '\n';
      return kFalseAlarm;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InsufficientCleanBeats ? kInsufficientCleanBeats : kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace sentinel::cli
