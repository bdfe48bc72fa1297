#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "simtrans/inference.h"
#include "simtrans/synthetic.h"
#include "simtrans/trainer.h"

namespace simtrans {

struct ExperimentConfig {
  TaskSpec task;
  ModelConfig model;  // vocab, levels and delay are taken from the task
  OptimizerConfig optimizer;
  LossWeights loss;
  int codec_sentences = 32;
  int codec_steps = 40;
  int train_examples = 512;
  int eval_examples = 40;
  int steps = 3000;
  int batch_size = 4;
  double token_dropout = 0;
  double time_budget_s = 0;  // stop training early once exceeded; 0 = none
  std::uint64_t seed = 1;
};

struct TrainedSystem {
  CodebookStack<float> codebooks;
  ModelConfig model;
  RqWeights<float> weights;
  std::vector<StreamLosses> curve;  // one entry per logged step
  int steps = 0;
  double train_seconds = 0;
};

using ProgressFn = std::function<void(int step, const StreamLosses&)>;

// Fits the codec, generates the training corpus and trains the model.
TrainedSystem TrainOnTask(const ExperimentConfig& config, const ProgressFn& progress = nullptr);
// Trains on ready-made examples; the returned codebooks are left empty. Only
// the optimizer, loss, batch, step and seed fields of `config` are used.
TrainedSystem TrainOnExamples(const ExperimentConfig& config, const ModelConfig& model,
                              std::span<const TrainingExample> examples, const ProgressFn& progress = nullptr);

// Held-out examples start at this generator index.
inline constexpr std::uint64_t kHeldOutIndex = 1'000'000;

struct EmittedWord {
  Token token = 0;
  int frame = 0;
};
// Word tokens of a text stream with their frames.
std::vector<EmittedWord> EmittedWords(const Multistream& streams);

// Index pairs (hyp, ref) of equal tokens on a minimum edit-distance path.
std::vector<std::pair<int, int>> MatchWords(std::span<const Token> hyp, std::span<const Token> ref);
int WordEditDistance(std::span<const Token> hyp, std::span<const Token> ref);

struct EvalReport {
  int sequences = 0;
  double accuracy = 0;             // 1 - edit distance / reference words, floored at 0, averaged
  double latency_frames = 0;       // mean signed emission minus minimum-lag start, matched words
  double laal_s = 0;
  double end_offset_s = 0;
  double bleu = 0;                 // corpus BLEU over word tokens
  int truncated = 0;
};

// Greedy decoding of held-out examples. The source stream of each example is
// fed in full, then its speaker's silence.
EvalReport EvaluateOnTask(const TrainedSystem& system, const TaskSpec& task, int count,
                          const SessionConfig& session, std::uint64_t first_index = kHeldOutIndex);

std::string FormatReport(const EvalReport& report);

}  // namespace simtrans
