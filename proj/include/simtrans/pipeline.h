#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "simtrans/config.h"

namespace simtrans {

// Command-line inputs that are not part of the run configuration.
struct CommandArgs {
  // make-data
  std::string split = "train";
  int count = -1;  // -1: training.train_examples or training.eval_examples
  // align-pipeline
  std::string source_transcript;
  std::string target_transcript;
  std::string manifest;  // optional corpus used to fit the word table
  // translate, bench
  std::vector<std::string> inputs;
  std::string checkpoint;
  std::string preset;  // empty keeps the configured sampling
  double gamma = -1;   // < 0 keeps the configured value
  long long sampling_seed = -1;
  int batch = 1;
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16};
  // eval
  std::vector<std::string> hyps, refs, timings;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// Runs one command and maps failures to exit codes: ConfigError and bad
// arguments give 2, DataError and missing files give 3, anything else 1.
// Messages go to `err`, reports to `out`.
int RunPipeline(const std::string& command, const RunConfig& config, const CommandArgs& args,
                std::ostream& out, std::ostream& err);

// Artifact layout under paths.out_dir.
std::string CodecPath(const RunConfig& config);
std::string CheckpointPath(const RunConfig& config);
std::string SplitDir(const RunConfig& config, const std::string& split);
std::string ManifestPath(const RunConfig& config, const std::string& split);

}  // namespace simtrans
