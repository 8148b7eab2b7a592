#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "sentinel/record_io.hpp"
#include "sentinel/synthkit.hpp"

using namespace sentinel;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "sentinel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// One suite on disk shared by the cases below.
const oracle::TempDir& suite() {
  static oracle::TempDir dir("cli_suite");
  static const bool made = [] {
    synth::generate_suite(7, dir.path());
    return true;
  }();
  (void)made;
  return dir;
}

std::filesystem::path first_of(Arrhythmia a, Truth t) {
  for (const auto& e : load_manifest(suite() / "manifest.csv").entries) {
    if (e.arrhythmia == a && e.truth == t) return e.record;
  }
  return {};
}

}  // namespace

TEST_CASE("classify exit codes") {
  const auto asys = first_of(Arrhythmia::Asystole, Truth::TrueAlarm);
  auto r = run({"classify", asys.string(), "--method", "improved"});
  CHECK(r.code == cli::kTrueAlarm);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["decision"] == "TrueAlarm");

  const auto sinus = first_of(Arrhythmia::Tachycardia, Truth::FalseAlarm);
  CHECK(run({"classify", sinus.string()}).code == cli::kFalseAlarm);

  r = run({"classify", (suite() / "nope.hea").string()});
  CHECK(r.code == cli::kError);
  CHECK_FALSE(r.err.empty());

  const auto vt = first_of(Arrhythmia::VTach, Truth::TrueAlarm);
  CHECK(run({"classify", vt.string(), "--method", "dtw-vbank"}).code == cli::kError);
  CHECK(run({"classify", vt.string(), "--method", "dtw-full"}).code == cli::kError);
  CHECK(run({"classify", vt.string(), "--method", "warp-drive"}).code == cli::kError);
  CHECK(run({"classify", vt.string(), "--method", "dtw-self-min"}).code == cli::kTrueAlarm);
}

TEST_CASE("classify with a ventricular bank and a config file") {
  oracle::TempDir dir("cli_bank");
  CHECK(run({"bank", "surrogate", "--out", (dir / "bank").string(), "--label", "V", "--count", "20"}).code == 0);
  CHECK(run({"bank", "surrogate", "--out", (dir / "bank").string(), "--label", "N", "--count", "20", "--seed", "9"})
            .code == 0);
  const auto vt = first_of(Arrhythmia::VTach, Truth::TrueAlarm);
  CHECK(run({"classify", vt.string(), "--method", "dtw-vbank", "--bank-dir", (dir / "bank").string()}).code ==
        cli::kTrueAlarm);

  {
    std::ofstream cfg(dir / "cfg.txt");
    cfg << "tachy_hr = 500\n";
  }
  const auto tachy = first_of(Arrhythmia::Tachycardia, Truth::TrueAlarm);
  CHECK(run({"classify", tachy.string()}).code == cli::kTrueAlarm);
  CHECK(run({"classify", tachy.string(), "--config", (dir / "cfg.txt").string()}).code == cli::kFalseAlarm);
  {
    std::ofstream cfg(dir / "bad.txt");
    cfg << "tachy_speed = 500\n";
  }
  CHECK(run({"classify", tachy.string(), "--config", (dir / "bad.txt").string()}).code == cli::kError);
}

TEST_CASE("evaluate writes a report and enforces latency") {
  oracle::TempDir dir("cli_eval");
  const auto manifest = (suite() / "manifest.csv").string();
  auto r = run({"evaluate", "--manifest", manifest, "--out", (dir / "r.json").string(), "--csv",
                (dir / "r.csv").string()});
  CHECK(r.code == 0);
  std::ifstream in(dir / "r.json");
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc["records"].size() == 50);
  CHECK(doc["metrics"]["overall"]["sensitivity"].get<double>() == 1.0);
  CHECK(std::filesystem::exists(dir / "r.csv"));

  CHECK(run({"evaluate", "--manifest", manifest, "--assert-latency-ms", "0.000001"}).code == cli::kLatencyExceeded);

  {
    std::ofstream m(dir / "unknown.csv");
    m << "record,arrhythmia,label\n" << first_of(Arrhythmia::VFib, Truth::TrueAlarm).string() << ",VFib,unknown\n";
  }
  CHECK(run({"evaluate", "--manifest", (dir / "unknown.csv").string()}).code == cli::kError);
}

TEST_CASE("evaluate DTW methods on the VT rows") {
  const auto manifest = (suite() / "manifest.csv").string();
  const auto r = run({"evaluate", "--manifest", manifest, "--method", "dtw-full"});
  CHECK(r.code == 0);
  CHECK(r.out.find("VTach") != std::string::npos);
  CHECK(run({"evaluate", "--manifest", manifest, "--method", "dtw-self-kl"}).code == 0);
}

TEST_CASE("bank commands") {
  oracle::TempDir dir("cli_selfbank");
  const auto sinus = first_of(Arrhythmia::VTach, Truth::FalseAlarm);
  CHECK(run({"bank", "build-self", "--record", sinus.string(), "--out", (dir / "self").string()}).code == 0);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "self")) ++files;
  CHECK(files == 20);
  const auto r = run({"bank", "inspect", "--bank-dir", (dir / "self").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("mu_min") != std::string::npos);
  CHECK(r.out.find("sigma_min") != std::string::npos);

  synth::SynthSpec spec;
  spec.duration_s = 120.0;
  spec.name = "noisy";
  spec.artifacts = {{"II", synth::Artifact::Kind::NoiseBurst, 120.0, 1.0}};
  const auto hea = write_record(synth::generate(spec).record, dir.path());
  CHECK(run({"bank", "build-self", "--record", hea.string(), "--out", (dir / "x").string()}).code ==
        cli::kInsufficientCleanBeats);
}

TEST_CASE("synth and manifest commands") {
  oracle::TempDir dir("cli_synth");
  CHECK(run({"synth", "--seed", "7", "--out", (dir / "a").string()}).code == 0);
  CHECK(run({"synth", "--seed", "7", "--out", (dir / "b").string()}).code == 0);
  CHECK(load_manifest(dir / "a" / "manifest.csv").entries.size() == 50);
  CHECK(oracle::read_bytes(dir / "a" / "sim013.dat") == oracle::read_bytes(dir / "b" / "sim013.dat"));

  {
    std::ofstream blocker(dir / "file");
    blocker << "x";
  }
  CHECK(run({"synth", "--out", (dir / "file" / "sub").string()}).code == cli::kError);

  CHECK(run({"manifest", "--dir", (dir / "a").string(), "--out", (dir / "m.csv").string()}).code == 0);
  CHECK(load_manifest(dir / "m.csv").entries.size() == 50);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == cli::kError);
}
