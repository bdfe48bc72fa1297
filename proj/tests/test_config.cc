#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "simtrans/config.h"
#include "simtrans/errors.h"
#include "simtrans/pipeline.h"

using namespace simtrans;
namespace fs = std::filesystem;

namespace {

std::string ConfigErrorOf(const std::string& json) {
  try {
    ParseRunConfig(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out, err;
};

Run Pipeline(const std::string& command, const RunConfig& config, const CommandArgs& args = {}) {
  std::ostringstream out, err;
  const int code = RunPipeline(command, config, args, out, err);
  return {code, out.str(), err.str()};
}

RunConfig SmallRun(const fs::path& dir, const std::string& regime) {
  RunConfig c = ParseRunConfig(R"({"task": {"regime": ")" + regime + R"("}})");
  c.paths.out_dir = dir.string();
  c.Resolve();
  return c;
}

}  // namespace

TEST_CASE("defaults resolve and carry the task-derived model fields") {
  RunConfig c;
  c.Resolve();
  CHECK(c.experiment.model.levels == c.task().codec.num_levels);
  CHECK(c.experiment.model.text_vocab == c.task().text_vocab());
  CHECK(c.experiment.model.audio_vocab == c.task().audio_vocab());
  CHECK(c.experiment.model.delay_steps == c.task().delay_steps);
}

TEST_CASE("unknown keys and bad values name the field") {
  CHECK(ConfigErrorOf(R"({"model": {"d_modl": 3}})").find("model.d_modl") != std::string::npos);
  CHECK(ConfigErrorOf(R"({"colour": 1})").find("colour") != std::string::npos);
  CHECK(ConfigErrorOf(R"({"training": {"steps": "many"}})").find("training.steps") != std::string::npos);
  CHECK(ConfigErrorOf(R"({"task": {"regime": "eventual"}})").find("task.regime") != std::string::npos);
  CHECK_FALSE(ConfigErrorOf("{not json").empty());
  CHECK(ConfigErrorOf(R"({"model": {"n_heads": 3}})").find("model") != std::string::npos);
}

TEST_CASE("configuration round trips through json") {
  RunConfig c = ParseRunConfig(R"({"seed": 9, "task": {"regime": "sentence"}, "sampling": {"cfg_gamma": 2.5}})");
  const std::string text = RunConfigToJson(c);
  const RunConfig back = ParseRunConfig(text);
  CHECK(RunConfigToJson(back) == text);
  CHECK(back.seed() == 9);
  CHECK(back.task().regime == LagRegime::kSentence);
  CHECK(back.decode.sampling.cfg_gamma == 2.5);
}

TEST_CASE("seed override from the environment") {
  RunConfig c;
  setenv("SIMTRANS_SEED", "42", 1);
  ApplySeedOverride(c);
  CHECK(c.seed() == 42);
  CHECK(c.task().seed == 42);
  CHECK(c.decode.sampling.seed == 42);
  setenv("SIMTRANS_SEED", "4x", 1);
  CHECK_THROWS_AS(ApplySeedOverride(c), ConfigError);
  unsetenv("SIMTRANS_SEED");
  RunConfig d;
  ApplySeedOverride(d);
  CHECK(d.seed() == RunConfig().seed());
}

TEST_CASE("pipeline exit codes") {
  TempDir dir("simtrans_exit_codes");
  const RunConfig c = SmallRun(dir.path, "contextual");
  CHECK(Pipeline("teleport", c).code == kExitConfig);
  const Run missing = Pipeline("align", c);
  CHECK(missing.code == kExitData);
  CHECK_FALSE(missing.err.empty());
  CommandArgs args;
  args.split = "dev";
  CHECK(Pipeline("make-data", c, args).code == kExitConfig);
}

TEST_CASE("make-data and align on a small corpus") {
  TempDir dir("simtrans_pipeline");
  CommandArgs args;
  args.split = "heldout";
  args.count = 40;

  const RunConfig none = SmallRun(dir.path / "none", "none");
  REQUIRE(Pipeline("train-codec", none).code == kExitOk);
  REQUIRE(Pipeline("make-data", none, args).code == kExitOk);
  const Run a = Pipeline("align", none, args);
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("silence inserted: total_s=0.000") != std::string::npos);
  CHECK(a.out.find("exact match vs planted: 1.000") != std::string::npos);

  const RunConfig ctx = SmallRun(dir.path / "ctx", "contextual");
  REQUIRE(Pipeline("train-codec", ctx).code == kExitOk);
  REQUIRE(Pipeline("make-data", ctx, args).code == kExitOk);
  const std::string manifest = Slurp(ManifestPath(ctx, "heldout"));
  const std::string first_msf = Slurp(fs::path(SplitDir(ctx, "heldout")) / "00000.msf");
  const Run b = Pipeline("align", ctx, args);
  REQUIRE(b.code == kExitOk);
  CHECK(b.out.find("violations=0") != std::string::npos);
  CHECK(b.out.find("silence inserted: total_s=0.000") == std::string::npos);

  // A rerun reproduces every artifact byte for byte.
  REQUIRE(Pipeline("train-codec", ctx).code == kExitOk);
  REQUIRE(Pipeline("make-data", ctx, args).code == kExitOk);
  CHECK(Slurp(ManifestPath(ctx, "heldout")) == manifest);
  CHECK(Slurp(fs::path(SplitDir(ctx, "heldout")) / "00000.msf") == first_msf);

  // The single-pair pipeline writes its four artifacts.
  CommandArgs pair;
  pair.source_transcript = (fs::path(SplitDir(ctx, "heldout")) / "00001.src.jsonl").string();
  pair.target_transcript = (fs::path(SplitDir(ctx, "heldout")) / "00001.base.jsonl").string();
  pair.manifest = ManifestPath(ctx, "heldout");
  const Run p = Pipeline("align-pipeline", ctx, pair);
  REQUIRE(p.code == kExitOk);
  for (const char* f : {"loglik.csv", "alignment.tsv", "smoothed.tsv", "aligned.jsonl"}) {
    CHECK(fs::exists(dir.path / "ctx" / "align" / f));
  }
}

TEST_CASE("command line front end") {
  const char* cli = std::getenv("SIMTRANS_CLI");
  REQUIRE(cli != nullptr);
  TempDir dir("simtrans_cli");
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({"model": {"d_modl": 3}})";
  const std::string base = std::string(cli) + " ";
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(status(base + "-c " + bad.string() + " train-codec") == kExitConfig);
  CHECK(status(base + "--no-such-flag") == kExitConfig);
  CHECK(status(base) == kExitConfig);
  CHECK(status(base + "--print-config") == kExitOk);
  CHECK(status("SIMTRANS_SEED=zz " + base + "--print-config") == kExitConfig);
}
