#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simtrans/model.h"
#include "simtrans/rng.h"
#include "simtrans/streams.h"

namespace simtrans {

struct SamplingConfig {
  double temperature_audio = 0.8;
  double temperature_text = 0.8;
  int top_k_audio = 250;
  int top_k_text = 50;
  double cfg_gamma = 3.0;
  std::uint64_t seed = 0;

  // "long": text temperature 0.8; "short": 0.1. Throws on other names.
  static SamplingConfig Preset(const std::string& name);
  static SamplingConfig Greedy();
  void Validate() const;
};

// Per-step logits of one sequence: text, then the audio positions evaluated.
struct LogitBundle {
  RowVector<float> text;
  std::vector<RowVector<float>> audio;
};

// gamma * good + (1 - gamma) * bad, elementwise.
RowVector<float> CfgCombine(const RowVector<float>& good, const RowVector<float>& bad, float gamma);
LogitBundle CfgCombine(const LogitBundle& good, const LogitBundle& bad, float gamma);

// Temperature 0 is argmax with ties to the lowest id. Otherwise keeps the
// top_k largest logits (ties to lower ids) and draws from softmax(l / T).
// Logits of -inf are never drawn.
Token SampleToken(std::span<const float> logits, double temperature, int top_k, Rng& rng);

enum class SessionState { kRunning, kSourceEnded, kFinished };

class Session;

// Hook applied to the combined text logits before sampling.
using TextLogitProcessor = std::function<void(const Session&, RowVector<float>&)>;

struct SessionConfig {
  SamplingConfig sampling;
  // Two conditioned passes combined with sampling.cfg_gamma.
  bool use_cfg = false;
  ConditionLabel label = ConditionLabel::kVeryGood;  // without CFG
  ConditionLabel cfg_good = ConditionLabel::kVeryGood;
  ConditionLabel cfg_bad = ConditionLabel::kVeryBad;
  // Frames allowed past the end of the given source before truncation.
  int cap_extra = 125;
  // Frames decoded after the text EOS; -1 means the model's delay_steps.
  int flush_frames = -1;
  // Source frame fed once the source is exhausted; repeated input EOS when
  // unset.
  std::optional<std::vector<Token>> pad_frame;
  double frame_rate_hz = 12.5;
  TextLogitProcessor text_processor;
};

// One streaming translation. Holds its own caches and RNG stream.
class Session {
 public:
  Session(const RqTransformer<float>& model, const SessionConfig& config, std::uint64_t stream_index = 0);

  SessionState state() const { return state_; }
  const Multistream& history() const { return history_; }
  int frames_emitted() const { return history_.frames(); }
  int source_frames_consumed() const { return consumed_; }
  bool context_exceeded() const { return context_exceeded_; }

  // Consumes one source frame (Q stream ids) and returns the emitted frame.
  // Throws std::logic_error after the session finished.
  MultistreamFrame Step(std::span<const Token> source_frame);

  // Advances several sessions of the same model by one frame in one batched
  // pass. Results equal stepping each session alone.
  static std::vector<MultistreamFrame> StepBatch(std::span<Session* const> sessions,
                                                 std::span<const std::vector<Token>> source_frames);

 private:
  const RqTransformer<float>* model_;
  SessionConfig config_;
  Rng rng_;
  std::vector<TemporalCache<float>> caches_;
  Multistream history_;
  SessionState state_ = SessionState::kRunning;
  int consumed_ = 0;
  int flush_left_ = -1;
  bool context_exceeded_ = false;

  std::vector<ConditionLabel> PassLabels() const;
  void Advance(const MultistreamFrame& frame);
};

struct SessionResult {
  Multistream frames;          // emitted frames with the consumed source
  bool truncated = false;      // stopped by the frame cap or the context
  bool finished = false;       // text EOS seen and flushed
  int text_eos_frame = -1;
  double wall_s = 0;
  double rtf = 0;              // frames / (frame_rate * wall_s)
  std::vector<double> frame_wall_s;
};

// Feeds `source` (T x Q stream ids) frame by frame. A frame whose tokens are
// all the input EOS id ends the source; if none appears, one is fed after the
// last frame. Decoding stops once the text EOS has been flushed, or at
// source.frames + cap_extra frames.
SessionResult RunSession(const RqTransformer<float>& model, const TokenGrid& source,
                         const SessionConfig& config, std::uint64_t stream_index = 0);

struct BatchOptions {
  std::uint64_t first_stream = 0;
  // Per-sequence replacement for config.pad_frame; empty uses the config.
  std::span<const std::vector<Token>> pad_frames;
};

// Sequence b uses RNG stream first_stream + b; each result equals RunSession
// with that stream index and pad frame.
std::vector<SessionResult> RunBatched(const RqTransformer<float>& model, std::span<const TokenGrid> sources,
                                      const SessionConfig& config, const BatchOptions& options = {});

struct BenchRow {
  int batch = 0;
  bool cfg = false;
  double wall_s = 0;
  double rtf = 0;                 // aggregate generated seconds per wall second
  double per_sequence_rtf = 0;    // rtf / batch
};

std::vector<BenchRow> RunBench(const RqTransformer<float>& model, const TokenGrid& source,
                               std::span<const int> batch_sizes, const SessionConfig& config);
std::string BenchCsv(std::span<const BenchRow> rows);

}  // namespace simtrans
