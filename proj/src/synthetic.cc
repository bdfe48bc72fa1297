#include "simtrans/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "simtrans/metrics.h"

namespace simtrans {

std::string RegimeName(LagRegime regime) {
  switch (regime) {
    case LagRegime::kNone:
      return "none";
    case LagRegime::kConstant:
      return "constant";
    case LagRegime::kSentence:
      return "sentence";
    case LagRegime::kContextual:
      return "contextual";
  }
  return "unknown";
}

LagRegime ParseRegime(const std::string& name) {
  for (LagRegime r : {LagRegime::kNone, LagRegime::kConstant, LagRegime::kSentence, LagRegime::kContextual}) {
    if (RegimeName(r) == name) return r;
  }
  throw std::invalid_argument("unknown lag regime '" + name + "'");
}

CodecConfig TaskSpec::DefaultCodec() {
  CodecConfig c;
  c.num_levels = 2;
  c.codebook_size = 32;
  c.latent_dim = 16;
  return c;
}

void TaskSpec::Validate() const {
  codec.Validate();
  if (vocab_size < 3) throw std::invalid_argument("vocab_size must be >= 3");
  if (min_words < 1 || max_words < min_words) throw std::invalid_argument("bad sentence length range");
  if (max_words > vocab_size) throw std::invalid_argument("sentences draw distinct words; max_words > vocab_size");
  if (min_word_frames < 1 || max_word_frames < min_word_frames) throw std::invalid_argument("bad word duration range");
  if (min_gap_frames < 0 || max_gap_frames < min_gap_frames) throw std::invalid_argument("bad gap range");
  if (min_lead_frames < 0 || max_lead_frames < min_lead_frames) throw std::invalid_argument("bad lead range");
  if (constant_lag_s < 0 || min_lag_s < 0) throw std::invalid_argument("lags must be >= 0");
  if (num_speakers < 1) throw std::invalid_argument("num_speakers must be >= 1");
  if (delay_steps < 0 || tail_frames < 0) throw std::invalid_argument("delay and tail must be >= 0");
}

SyntheticTask::SyntheticTask(TaskSpec spec) : spec_(std::move(spec)), featurizer_(spec_.codec) {
  spec_.Validate();
  Rng rng = Rng::Stream(spec_.seed, 0xBA5Eull);
  const int v = spec_.vocab_size;
  mapping_.resize(v);
  std::iota(mapping_.begin(), mapping_.end(), 0);
  for (int i = v - 1; i > 0; --i) std::swap(mapping_[i], mapping_[rng.Int(0, i)]);
  durations_.resize(v);
  for (int w = 0; w < v; ++w) durations_[w] = rng.Int(spec_.min_word_frames, spec_.max_word_frames);
  classes_.resize(v);
  for (int w = 0; w < v; ++w) {
    classes_[w] = w < v / 3 ? WordClass::kA : (w < 2 * v / 3 ? WordClass::kB : WordClass::kOther);
  }
  // Frequencies are multiples of the frame rate so every frame of a word
  // carries the same samples.
  const double step = spec_.codec.frame_rate_hz;
  auto draw = [&](int count, int lo, int hi) {
    std::vector<double> f(count);
    for (auto& x : f) x = step * rng.Int(lo, hi);
    return f;
  };
  source_freq_ = draw(2 * v, 8, 480);
  target_freq_ = draw(2 * v, 8, 480);
  speaker_freq_ = draw(spec_.num_speakers, 8, 480);
}

WordClass SyntheticTask::ClassOf(int word) const { return classes_.at(word); }

std::string SyntheticTask::SourceText(int word) { return "s" + std::to_string(word); }
std::string SyntheticTask::TargetText(int word) { return "t" + std::to_string(word); }

SentencePlan SyntheticTask::PlanSentence(Rng& rng) const {
  const double fr = spec_.codec.frame_rate_hz;
  SentencePlan plan;
  const int n = rng.Int(spec_.min_words, spec_.max_words);
  std::vector<int> pool(spec_.vocab_size);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n; ++i) {
    const int k = rng.Int(i, spec_.vocab_size - 1);
    std::swap(pool[i], pool[k]);
    plan.source_words.push_back(pool[i]);
  }
  std::vector<int> start_frames;
  int cursor = rng.Int(spec_.min_lead_frames, spec_.max_lead_frames);
  for (int w : plan.source_words) {
    start_frames.push_back(cursor);
    plan.source.words.push_back({SourceText(w), cursor / fr, (cursor + durations_[w]) / fr});
    cursor += durations_[w] + rng.Int(spec_.min_gap_frames, spec_.max_gap_frames);
  }
  for (int j = 0; j < n; ++j) {
    const int s = plan.source_words[j];
    if (spec_.reorder && j + 1 < n && ClassOf(s) == WordClass::kA && ClassOf(plan.source_words[j + 1]) == WordClass::kB) {
      plan.target_words.push_back(mapping_[plan.source_words[j + 1]]);
      plan.planted.push_back(j + 2);
      plan.target_words.push_back(mapping_[s]);
      plan.planted.push_back(j + 1);
      ++j;
    } else {
      plan.target_words.push_back(mapping_[s]);
      plan.planted.push_back(j + 1);
    }
  }
  // The unlagged target keeps the source slot of each position and never
  // overlaps its predecessor.
  int prev_end = 0;
  for (std::size_t j = 0; j < plan.target_words.size(); ++j) {
    const int source_word = plan.source_words[plan.planted[j] - 1];
    const int dur = durations_[source_word];
    const int start = std::max(start_frames[j], prev_end);
    plan.target_base.words.push_back({TargetText(plan.target_words[j]), start / fr, (start + dur) / fr});
    prev_end = start + dur;
  }
  return plan;
}

TimedTranscript ApplyLagRegime(const TimedTranscript& base, const TimedTranscript& source, const AlignmentMap& a,
                               LagRegime regime, double constant_lag_s, double min_lag_s) {
  if (base.words.empty() || source.words.empty()) throw std::invalid_argument("empty transcript");
  TimedTranscript out = base;
  double shift = 0;
  switch (regime) {
    case LagRegime::kNone:
      return out;
    case LagRegime::kConstant:
      shift = constant_lag_s;
      break;
    case LagRegime::kSentence:
      // Every target word is aligned to the last source word.
      return InsertSilences(base, source, AlignmentMap(base.words.size(), source.size()), min_lag_s);
    case LagRegime::kContextual:
      return InsertSilences(base, source, a, min_lag_s);
  }
  for (auto& w : out.words) {
    w.start += shift;
    w.end += shift;
  }
  return out;
}

TimedTranscript SyntheticTask::ApplyRegime(const SentencePlan& plan, LagRegime regime) const {
  return ApplyLagRegime(plan.target_base, plan.source, plan.planted, regime, spec_.constant_lag_s, spec_.min_lag_s);
}

std::vector<float> SyntheticTask::Synthesize(const TimedTranscript& words, bool target_side, int speaker,
                                             int total_frames) const {
  const int spf = spec_.codec.SamplesPerFrame();
  const double sr = spec_.codec.sample_rate_hz;
  const double fr = spec_.codec.frame_rate_hz;
  std::vector<float> signal(static_cast<std::size_t>(total_frames) * spf, 0.0f);
  const double fs = speaker_freq_.at(speaker);
  for (int t = 0; t < total_frames; ++t) {
    for (int n = 0; n < spf; ++n) {
      signal[static_cast<std::size_t>(t) * spf + n] =
          static_cast<float>(spec_.speaker_amplitude * std::sin(2.0 * M_PI * fs * n / sr));
    }
  }
  const auto& freqs = target_side ? target_freq_ : source_freq_;
  for (const auto& w : words.words) {
    const int id = std::stoi(w.text.substr(1));
    const int first = FrameOfTime(w.start, fr);
    const int last = FrameOfTime(w.end, fr);
    for (int t = first; t < last && t < total_frames; ++t) {
      // The first frame of a word gets a brighter onset.
      const double onset = t == first ? 1.5 : 1.0;
      for (int n = 0; n < spf; ++n) {
        const double x = std::sin(2.0 * M_PI * freqs[2 * id] * n / sr) +
                         0.6 * onset * std::sin(2.0 * M_PI * freqs[2 * id + 1] * n / sr + 0.3);
        signal[static_cast<std::size_t>(t) * spf + n] += static_cast<float>(x);
      }
    }
  }
  return signal;
}

std::vector<float> SyntheticTask::SilenceFrame(int speaker) const {
  return Synthesize(TimedTranscript{}, false, speaker, 1);
}

std::vector<Token> SyntheticTask::SilenceTokens(const CodebookStack<float>& codebooks, int speaker) const {
  const auto signal = SilenceFrame(speaker);
  const TokenGrid grid = ToStreamTokens(RvqEncode(featurizer_(signal), codebooks, -1, spec_.codec.frame_rate_hz));
  return {grid.tokens.begin(), grid.tokens.end()};
}

CodebookStack<float> SyntheticTask::TrainCodec(int sentences, int steps, std::uint64_t seed) const {
  if (sentences < 1 || steps < 0) throw std::invalid_argument("bad codec training size");
  const double fr = spec_.codec.frame_rate_hz;
  std::vector<MatrixF> parts;
  Eigen::Index rows = 0;
  for (int k = 0; k < sentences; ++k) {
    Rng rng = Rng::Stream(seed, 0xC0DEC000ull + k);
    const SentencePlan plan = PlanSentence(rng);
    const int speaker = rng.Int(0, spec_.num_speakers - 1);
    const int frames = FrameOfTime(plan.target_base.words.back().end, fr) + 2;
    parts.push_back(featurizer_(Synthesize(plan.source, false, speaker, frames)));
    parts.push_back(featurizer_(Synthesize(plan.target_base, true, speaker, frames)));
    rows += parts[parts.size() - 2].rows() + parts.back().rows();
  }
  MatrixF batch(rows, spec_.codec.latent_dim);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    batch.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  Rng rng = Rng::Stream(seed, 0xC0DEC0DEull);
  CodebookStack<float> books = InitCodebooksKMeansPlusPlus(batch, spec_.codec, rng);
  for (int s = 0; s < steps; ++s) CodebookTrainStep(batch, books, 0.9, 0.25, rng);
  return books;
}

std::vector<double> MeanEmbedding(const Matrix<float>& latents, const TimedTranscript& words, double frame_rate_hz) {
  std::vector<double> mean(static_cast<std::size_t>(latents.cols()), 0.0);
  int count = 0;
  for (const auto& w : words.words) {
    for (int t = FrameOfTime(w.start, frame_rate_hz); t < FrameOfTime(w.end, frame_rate_hz) && t < latents.rows(); ++t) {
      for (Eigen::Index c = 0; c < latents.cols(); ++c) mean[c] += latents(t, c);
      ++count;
    }
  }
  if (count > 0) {
    for (auto& x : mean) x /= count;
  }
  return mean;
}

SyntheticExample SyntheticTask::GenerateExample(const CodebookStack<float>& codebooks, std::uint64_t index) const {
  const double fr = spec_.codec.frame_rate_hz;
  if (codebooks.num_levels() != spec_.codec.num_levels || codebooks.latent_dim() != spec_.codec.latent_dim) {
    throw std::invalid_argument("codebooks do not match the task codec");
  }
  Rng rng = Rng::Stream(spec_.seed, index);
  SyntheticExample ex;
  ex.plan = PlanSentence(rng);
  ex.source_speaker = rng.Int(0, spec_.num_speakers - 1);
  ex.target_speaker = rng.Bernoulli(spec_.same_speaker_prob) ? ex.source_speaker : rng.Int(0, spec_.num_speakers - 1);
  ex.target = ApplyRegime(ex.plan, spec_.regime);
  ex.contextual_target = ApplyRegime(ex.plan, LagRegime::kContextual);

  ex.source_end_frame = FrameOfTime(ex.plan.source.words.back().end, fr);
  const int output_end_frame = FrameOfTime(ex.target.words.back().end, fr) - 1;
  ex.text_eos_frame = output_end_frame + 1;
  const int frames = std::max(ex.source_end_frame, ex.text_eos_frame) + 1 + spec_.delay_steps + spec_.tail_frames;

  const MatrixF source_latents = featurizer_(Synthesize(ex.plan.source, false, ex.source_speaker, frames));
  const MatrixF target_latents = featurizer_(Synthesize(ex.target, true, ex.target_speaker, frames));
  ex.source_codes = RvqEncode(source_latents, codebooks, -1, fr);
  ex.target_codes = RvqEncode(target_latents, codebooks, -1, fr);
  const auto a = MeanEmbedding(source_latents, ex.plan.source, fr);
  const auto b = MeanEmbedding(target_latents, ex.target, fr);
  ex.similarity = CosineSimilarity(a, b);

  std::vector<PlannedWord> words;
  for (std::size_t j = 0; j < ex.plan.target_words.size(); ++j) {
    words.push_back({{static_cast<Token>(kTextFirstWord + ex.plan.target_words[j])},
                     FrameOfTime(ex.target.words[j].start, fr)});
  }
  const InnerMonologuePlan text = BuildInnerMonologue(words, frames);
  const TokenGrid source_stream = ApplyAcousticDelay(ToStreamTokens(ex.source_codes), spec_.delay_steps);
  const TokenGrid target_stream = ApplyAcousticDelay(ToStreamTokens(ex.target_codes), spec_.delay_steps);
  auto [source_eos, text_eos] = InsertEosMarkers(source_stream, text, ex.source_end_frame, output_end_frame);
  ex.streams = BuildMultistream(target_stream, source_eos, text_eos);
  return ex;
}

std::vector<SyntheticExample> SyntheticTask::GenerateCorpus(const CodebookStack<float>& codebooks, int count,
                                                            std::uint64_t first_index) const {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  std::vector<SyntheticExample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(GenerateExample(codebooks, first_index + k));
  if (count >= 5) {
    std::vector<double> sims;
    for (const auto& ex : out) sims.push_back(ex.similarity);
    const auto labels = QuantileLabels(sims);
    for (int k = 0; k < count; ++k) out[k].label = labels[k];
  }
  return out;
}

ModelConfig SyntheticTask::SuggestedModel() const {
  ModelConfig c;
  c.levels = spec_.codec.num_levels;
  c.text_vocab = spec_.text_vocab();
  c.audio_vocab = spec_.audio_vocab();
  c.delay_steps = spec_.delay_steps;
  c.context_frames = 256;
  return c;
}

void ApplyTokenDropout(TrainingExample& example, double p, int audio_vocab, Rng& rng) {
  if (p <= 0) return;
  Multistream& in = example.inputs;
  for (int t = 0; t < in.frames(); ++t) {
    for (int q = 0; q < in.levels(); ++q) {
      Token& tok = in.source(t, q);
      if (tok < kAudioFirstCode) continue;
      if (rng.Bernoulli(p)) tok = static_cast<Token>(rng.Int(kAudioFirstCode, audio_vocab - 1));
    }
  }
}

}  // namespace simtrans
