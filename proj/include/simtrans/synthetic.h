#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simtrans/alignment.h"
#include "simtrans/codec.h"
#include "simtrans/labels.h"
#include "simtrans/model.h"
#include "simtrans/streams.h"
#include "simtrans/timing.h"

namespace simtrans {

enum class LagRegime { kNone, kConstant, kSentence, kContextual };

std::string RegimeName(LagRegime regime);
// Throws std::invalid_argument on unknown names.
LagRegime ParseRegime(const std::string& name);

// Target timing under a regime: unchanged, shifted by a constant, or delayed
// so each word starts min_lag_s after its aligned source word ends. The
// sentence regime aligns every word to the last source word.
TimedTranscript ApplyLagRegime(const TimedTranscript& target, const TimedTranscript& source, const AlignmentMap& a,
                               LagRegime regime, double constant_lag_s, double min_lag_s);

struct TaskSpec {
  int vocab_size = 24;  // words per language
  int min_words = 13;
  int max_words = 16;
  int min_word_frames = 3;
  int max_word_frames = 6;
  int min_gap_frames = 0;
  int max_gap_frames = 2;
  int min_lead_frames = 1;
  int max_lead_frames = 3;
  // Words of class A followed by class B swap places in the target.
  bool reorder = true;

  LagRegime regime = LagRegime::kContextual;
  double constant_lag_s = 6.0;
  double min_lag_s = 2.0;

  int num_speakers = 4;
  double speaker_amplitude = 0.25;
  double same_speaker_prob = 0.5;

  int delay_steps = 2;
  int tail_frames = 1;
  CodecConfig codec = DefaultCodec();
  std::uint64_t seed = 1;

  static CodecConfig DefaultCodec();
  void Validate() const;
  int text_vocab() const { return kTextFirstWord + vocab_size; }
  int audio_vocab() const { return kAudioFirstCode + codec.codebook_size; }
};

enum class WordClass { kA, kB, kOther };

// One planted sentence pair before synthesis.
struct SentencePlan {
  std::vector<int> source_words;  // ids in [0, vocab)
  std::vector<int> target_words;
  AlignmentMap planted;           // 1-based source index per target word
  TimedTranscript source;
  TimedTranscript target_base;    // target words on the source schedule
};

struct SyntheticExample {
  SentencePlan plan;
  TimedTranscript target;             // under the task's regime
  TimedTranscript contextual_target;  // minimum-lag schedule for the planted map
  TokenGrid source_codes;             // codec indices, no delay
  TokenGrid target_codes;
  Multistream streams;                // model frames: delay, EOS markers, text
  int source_end_frame = 0;           // frame of the input EOS
  int text_eos_frame = 0;
  int source_speaker = 0;
  int target_speaker = 0;
  double similarity = 0;
  ConditionLabel label = ConditionLabel::kNeutral;
};

class SyntheticTask {
 public:
  explicit SyntheticTask(TaskSpec spec);

  const TaskSpec& spec() const { return spec_; }
  WordClass ClassOf(int word) const;
  int Translate(int source_word) const { return mapping_[source_word]; }
  int Duration(int word) const { return durations_[word]; }
  static std::string SourceText(int word);
  static std::string TargetText(int word);

  SentencePlan PlanSentence(Rng& rng) const;
  // Target timing for a regime; contextual uses the planted map.
  TimedTranscript ApplyRegime(const SentencePlan& plan, LagRegime regime) const;

  // Waveform of a transcript; `total_frames` frames of samples.
  std::vector<float> Synthesize(const TimedTranscript& words, bool target_side, int speaker,
                                int total_frames) const;
  std::vector<float> SilenceFrame(int speaker) const;

  // Codebooks fitted on latents of freshly planned sentences.
  CodebookStack<float> TrainCodec(int sentences, int steps, std::uint64_t seed) const;

  // Examples seeded by (spec.seed, first_index + k). Labels come from
  // quantiles of the source/target similarity over the returned set.
  std::vector<SyntheticExample> GenerateCorpus(const CodebookStack<float>& codebooks, int count,
                                               std::uint64_t first_index = 0) const;
  SyntheticExample GenerateExample(const CodebookStack<float>& codebooks, std::uint64_t index) const;

  // Stream ids of a silent frame for `speaker`, one per level.
  std::vector<Token> SilenceTokens(const CodebookStack<float>& codebooks, int speaker) const;

  ModelConfig SuggestedModel() const;

 private:
  TaskSpec spec_;
  std::vector<int> mapping_;
  std::vector<int> durations_;
  std::vector<WordClass> classes_;
  std::vector<double> source_freq_, target_freq_, speaker_freq_;
  Featurizer<float> featurizer_;
};

// Replaces source-stream audio tokens of the inputs with random codes with
// probability p; targets are untouched.
void ApplyTokenDropout(TrainingExample& example, double p, int audio_vocab, Rng& rng);

// Mean latent of the frames covered by words, used as a speaker embedding.
std::vector<double> MeanEmbedding(const Matrix<float>& latents, const TimedTranscript& words,
                                  double frame_rate_hz);

}  // namespace simtrans
