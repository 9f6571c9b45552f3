#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fkmad/checkpoint.hpp"
#include "fkmad/cli.hpp"
#include "fkmad/config.hpp"
#include "fkmad/model.hpp"
#include "json.hpp"

using namespace fkmad;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small end-to-end setup: a short series, a tiny model and one epoch.
struct Workdir {
  fs::path dir, ini;

  explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / ("fkmad_test_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    ini = dir / "run.ini";
    std::ofstream(ini) << "[run]\nseed = 3\n"
                          "[model]\nd_inner = 1\nd_state = 4\nwindow_size = 32\n"
                          "[loss]\nepochs = 1\nbatch_size = 16\n"
                          "[score]\nstride = 16\n"
                          "[synth]\nT = 600\nD = 2\ndensity = 0.02\n";
  }
  ~Workdir() { fs::remove_all(dir); }

  std::vector<std::string> with(std::vector<std::string> args) const {
    args.insert(args.end(), {"--config", ini.string(), "--out", dir.string()});
    return args;
  }
  std::string csv() const { return (dir / "synth.csv").string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"fly"}).code == kExitUsage);
  CHECK(cli({"train", "--config", "/nonexistent.ini"}).code == kExitUsage);
  CHECK(cli({"verify", "nothing"}).code == kExitUsage);
  CHECK(cli({"train", "--set", "loss.speed=1"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("zero epochs writes the initial parameters") {
  const Workdir w("init");
  REQUIRE(cli(w.with({"synth"})).code == kExitOk);
  const Run r = cli(w.with({"train", "--data", w.csv(), "--set", "loss.epochs=0"}));
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const Checkpoint ck = load_checkpoint((w.dir / "checkpoint.bin").string());
  const RunConfig cfg = parse_config(ck.config).config;
  CHECK(cfg.model.D == 2);
  const ModelParams init = init_model(cfg.model, 3);
  for (const auto& [name, t] : init.tensors) CHECK(ck.tensors.at(name) == t);
  CHECK(ck.tensors.size() == init.tensors.size() + 2);
}

TEST_CASE("train, score and eval round trip") {
  const Workdir w("flow");
  REQUIRE(cli(w.with({"synth"})).code == kExitOk);
  Run r = cli(w.with({"train", "--data", w.csv()}));
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  CHECK(fs::exists(w.dir / "loss_history.jsonl"));
  CHECK(fs::exists(w.dir / "run_config.ini"));

  r = cli(w.with({"score", "--data", w.csv()}));
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const std::string scores = slurp(w.dir / "scores.jsonl");
  std::istringstream lines(scores);
  std::string line;
  std::getline(lines, line);
  const auto header = nlohmann::json::parse(line);
  CHECK(header["type"] == "header");
  std::size_t n = 0;
  while (std::getline(lines, line)) CHECK(nlohmann::json::parse(line)["t"] == n++);
  CHECK(header["records"] == n);
  CHECK(n == (600 - 32) / 16 * 16 + 32);

  // Same inputs, same bytes.
  REQUIRE(cli(w.with({"score", "--data", w.csv()})).code == kExitOk);
  CHECK(slurp(w.dir / "scores.jsonl") == scores);

  r = cli(w.with({"eval", "--data", w.csv()}));
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto report = nlohmann::json::parse(slurp(w.dir / "report.json"));
  CHECK(report["f1"].get<double>() >= 0.0);
  CHECK(report["pa_f1"].get<double>() >= report["f1"].get<double>());

  // Scores longer than the series they are evaluated against.
  std::ofstream(w.dir / "short.csv") << "a,b,label\n0,0,0\n1,1,1\n";
  CHECK(cli(w.with({"eval", "--data", (w.dir / "short.csv").string()})).code == kExitData);

  // An explicit model key that disagrees with the checkpoint.
  CHECK(cli(w.with({"score", "--data", w.csv(), "--set", "model.d_inner=2"})).code == kExitUsage);
}

TEST_CASE("data errors exit 3") {
  const Workdir w("bad");
  std::ofstream(w.dir / "bad.csv") << "a,b\n1,2\n3,x\n";
  const Run r = cli(w.with({"train", "--data", (w.dir / "bad.csv").string()}));
  CHECK(r.code == kExitData);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(cli(w.with({"score", "--data", (w.dir / "bad.csv").string()})).code == kExitData);
}

TEST_CASE("verify exit status follows the checks") {
  CHECK(cli({"verify", "scan"}).code == kExitOk);
  CHECK(cli({"verify", "scan", "--mutate-a", "1.001"}).code == kExitCheckFailed);
}
