#include "simtrans/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "simtrans/metrics.h"

namespace simtrans {

TrainedSystem TrainOnTask(const ExperimentConfig& config, const ProgressFn& progress) {
  const SyntheticTask task(config.task);
  CodebookStack<float> codebooks = task.TrainCodec(config.codec_sentences, config.codec_steps, config.seed);
  ModelConfig model = config.model;
  const ModelConfig suggested = task.SuggestedModel();
  model.levels = suggested.levels;
  model.text_vocab = suggested.text_vocab;
  model.audio_vocab = suggested.audio_vocab;
  model.delay_steps = suggested.delay_steps;

  const auto corpus = task.GenerateCorpus(codebooks, config.train_examples, 0);
  std::vector<TrainingExample> examples;
  examples.reserve(corpus.size());
  for (const auto& ex : corpus) examples.push_back(TrainingExample::FromStreams(ex.streams, ex.label));
  TrainedSystem sys = TrainOnExamples(config, model, examples, progress);
  sys.codebooks = std::move(codebooks);
  return sys;
}

TrainedSystem TrainOnExamples(const ExperimentConfig& config, const ModelConfig& model,
                              std::span<const TrainingExample> examples, const ProgressFn& progress) {
  if (examples.empty()) throw std::invalid_argument("no training examples");
  model.Validate();
  for (const auto& ex : examples) {
    if (ex.inputs.frames() > model.context_frames) {
      throw std::invalid_argument("training example longer than the model context");
    }
  }
  TrainedSystem sys;
  sys.model = model;
  Trainer trainer(sys.model, config.optimizer, config.loss, config.seed);
  Rng rng = Rng::Stream(config.seed, 0x7EA1ull);
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrainingExample> batch;
  for (int step = 0; step < config.steps; ++step) {
    batch.clear();
    for (int b = 0; b < config.batch_size; ++b) {
      batch.push_back(examples[rng.Below(examples.size())]);
      ApplyTokenDropout(batch.back(), config.token_dropout, sys.model.audio_vocab, rng);
    }
    const StreamLosses l = trainer.TrainStep(batch);
    if (step % 50 == 0 || step + 1 == config.steps) {
      sys.curve.push_back(l);
      if (progress) progress(step, l);
    }
    sys.steps = step + 1;
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.time_budget_s > 0 && elapsed > config.time_budget_s) break;
  }
  sys.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  sys.weights = trainer.weights();
  return sys;
}

std::vector<EmittedWord> EmittedWords(const Multistream& streams) {
  std::vector<EmittedWord> out;
  for (int t = 0; t < streams.frames(); ++t) {
    if (streams.text(t) >= kTextFirstWord) out.push_back({streams.text(t), t});
  }
  return out;
}

namespace {

// Full Levenshtein table, (hyp + 1) x (ref + 1).
std::vector<std::vector<int>> EditTable(std::span<const Token> hyp, std::span<const Token> ref) {
  std::vector<std::vector<int>> d(hyp.size() + 1, std::vector<int>(ref.size() + 1));
  for (std::size_t i = 0; i <= hyp.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= ref.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)});
    }
  }
  return d;
}

}  // namespace

int WordEditDistance(std::span<const Token> hyp, std::span<const Token> ref) {
  return EditTable(hyp, ref)[hyp.size()][ref.size()];
}

std::vector<std::pair<int, int>> MatchWords(std::span<const Token> hyp, std::span<const Token> ref) {
  const auto d = EditTable(hyp, ref);
  std::vector<std::pair<int, int>> matches;
  std::size_t i = hyp.size();
  std::size_t j = ref.size();
  while (i > 0 && j > 0) {
    if (hyp[i - 1] == ref[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      matches.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
      --i;
      --j;
    } else if (d[i][j] == d[i - 1][j - 1] + 1) {
      --i;
      --j;
    } else if (d[i][j] == d[i - 1][j] + 1) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(matches.begin(), matches.end());
  return matches;
}

EvalReport EvaluateOnTask(const TrainedSystem& system, const TaskSpec& spec, int count, const SessionConfig& session,
                          std::uint64_t first_index) {
  const SyntheticTask task(spec);
  const double fr = spec.codec.frame_rate_hz;
  const RqTransformer<float> model(system.model, system.weights);
  std::vector<SyntheticExample> examples;
  for (int k = 0; k < count; ++k) examples.push_back(task.GenerateExample(system.codebooks, first_index + k));

  EvalReport report;
  report.sequences = count;
  std::vector<double> latencies;
  std::vector<std::string> hyp_lines, ref_lines;
  double accuracy_sum = 0;
  double laal_sum = 0;
  double offset_sum = 0;
  int timed = 0;
  for (const auto& ex : examples) {
    SessionConfig c = session;
    c.pad_frame = task.SilenceTokens(system.codebooks, ex.source_speaker);
    const TokenGrid source = SplitMultistream(ex.streams).source;
    const SessionResult r = RunSession(model, source, c, 0);
    if (r.truncated) ++report.truncated;

    const auto emitted = EmittedWords(r.frames);
    std::vector<Token> hyp, ref;
    for (const auto& w : emitted) hyp.push_back(w.token);
    for (int w : ex.plan.target_words) ref.push_back(static_cast<Token>(kTextFirstWord + w));
    const int ed = WordEditDistance(hyp, ref);
    accuracy_sum += std::max(0.0, 1.0 - static_cast<double>(ed) / static_cast<double>(ref.size()));
    for (const auto& [h, j] : MatchWords(hyp, ref)) {
      latencies.push_back(emitted[h].frame - FrameOfTime(ex.contextual_target.words[j].start, fr));
    }

    std::string hl, rl;
    for (Token t : hyp) hl += "t" + std::to_string(t - kTextFirstWord) + " ";
    for (Token t : ref) rl += "t" + std::to_string(t - kTextFirstWord) + " ";
    hyp_lines.push_back(hl);
    ref_lines.push_back(rl);

    if (!emitted.empty()) {
      LatencyInputs in;
      for (const auto& w : emitted) in.emit_times.push_back(w.frame / fr);
      in.source_duration = ex.plan.source.words.back().end;
      in.n_ref = static_cast<int>(ref.size());
      laal_sum += Laal(in);
      // Emitted words last as long as the target word they name.
      const int last = emitted.back().token - kTextFirstWord;
      int dur = 0;
      for (int s = 0; s < spec.vocab_size; ++s) {
        if (task.Translate(s) == last) dur = task.Duration(s);
      }
      offset_sum += EndOffset(in.source_duration, (emitted.back().frame + dur) / fr);
      ++timed;
    }
  }
  report.accuracy = accuracy_sum / count;
  if (!latencies.empty()) {
    double s = 0;
    for (double l : latencies) s += l;
    report.latency_frames = s / static_cast<double>(latencies.size());
  }
  if (timed > 0) {
    report.laal_s = laal_sum / timed;
    report.end_offset_s = offset_sum / timed;
  }
  report.bleu = CorpusBleu(hyp_lines, ref_lines);
  return report;
}

std::string FormatReport(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << "sequences=" << r.sequences << " accuracy=" << r.accuracy
     << " latency_frames=" << r.latency_frames << " laal_s=" << r.laal_s << " end_offset_s=" << r.end_offset_s
     << " bleu=" << r.bleu << " truncated=" << r.truncated;
  return os.str();
}

}  // namespace simtrans
