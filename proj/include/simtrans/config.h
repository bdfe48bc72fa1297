#pragma once

#include <cstdint>
#include <string>

#include "simtrans/experiment.h"
#include "simtrans/inference.h"
#include "simtrans/timing.h"

namespace simtrans {

struct AlignmentSettings {
  SpikeOptions spikes;
  int em_iterations = 8;
  int threads = 1;
};

struct DecodeSettings {
  SamplingConfig sampling;
  bool use_cfg = false;
  ConditionLabel label = ConditionLabel::kVeryGood;
  int cap_extra = 125;
  int flush_frames = -1;
};

struct PathSettings {
  std::string out_dir = "run";
};

// Everything a pipeline command needs. Model vocabularies, levels and delay
// are derived from the task, so they are not part of the document.
struct RunConfig {
  ExperimentConfig experiment;
  AlignmentSettings alignment;
  DecodeSettings decode;
  PathSettings paths;

  RunConfig();
  // Copies the task-derived model fields and checks every section. Throws
  // ConfigError naming the field.
  void Resolve();
  SessionConfig Session() const;
  const TaskSpec& task() const { return experiment.task; }
  std::uint64_t seed() const { return experiment.seed; }
};

// Parses a JSON document over the defaults. Unknown keys and mistyped values
// throw ConfigError with the dotted field path.
RunConfig ParseRunConfig(const std::string& json_text);
RunConfig LoadRunConfig(const std::string& path);
std::string RunConfigToJson(const RunConfig& config);

// Applies SIMTRANS_SEED when set; a malformed value is a ConfigError.
void ApplySeedOverride(RunConfig& config);

}  // namespace simtrans
