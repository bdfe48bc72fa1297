#include "simtrans/inference.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace simtrans {

SamplingConfig SamplingConfig::Preset(const std::string& name) {
  SamplingConfig c;
  if (name == "long") {
    c.temperature_text = 0.8;
  } else if (name == "short") {
    c.temperature_text = 0.1;
  } else {
    throw std::invalid_argument("unknown sampling preset '" + name + "' (expected short or long)");
  }
  return c;
}

SamplingConfig SamplingConfig::Greedy() {
  SamplingConfig c;
  c.temperature_audio = 0;
  c.temperature_text = 0;
  return c;
}

void SamplingConfig::Validate() const {
  if (temperature_audio < 0 || temperature_text < 0) throw std::invalid_argument("temperatures must be >= 0");
  if (top_k_audio < 1 || top_k_text < 1) throw std::invalid_argument("top_k must be >= 1");
  if (!std::isfinite(cfg_gamma)) throw std::invalid_argument("cfg_gamma must be finite");
}

RowVector<float> CfgCombine(const RowVector<float>& good, const RowVector<float>& bad, float gamma) {
  if (good.size() != bad.size()) throw std::invalid_argument("logit shapes differ");
  RowVector<float> out(good.size());
  for (Eigen::Index k = 0; k < good.size(); ++k) out[k] = gamma * good[k] + (1.0f - gamma) * bad[k];
  return out;
}

LogitBundle CfgCombine(const LogitBundle& good, const LogitBundle& bad, float gamma) {
  if (good.audio.size() != bad.audio.size()) throw std::invalid_argument("logit bundle shapes differ");
  LogitBundle out;
  out.text = CfgCombine(good.text, bad.text, gamma);
  for (std::size_t k = 0; k < good.audio.size(); ++k) out.audio.push_back(CfgCombine(good.audio[k], bad.audio[k], gamma));
  return out;
}

Token SampleToken(std::span<const float> logits, double temperature, int top_k, Rng& rng) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  if (temperature == 0) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
      if (logits[k] > logits[best]) best = k;
    }
    return static_cast<Token>(best);
  }
  if (temperature < 0) throw std::invalid_argument("negative temperature");
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 1)), logits.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&logits](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  order.resize(keep);
  const double mx = logits[order[0]];
  if (!std::isfinite(mx)) throw std::invalid_argument("no finite logits to sample from");
  std::vector<double> weights(keep);
  double total = 0;
  for (std::size_t k = 0; k < keep; ++k) {
    const double l = logits[order[k]];
    weights[k] = std::isfinite(l) ? std::exp((l - mx) / temperature) : 0.0;
    total += weights[k];
  }
  double u = rng.Uniform() * total;
  for (std::size_t k = 0; k < keep; ++k) {
    if (u < weights[k]) return static_cast<Token>(order[k]);
    u -= weights[k];
  }
  // Rounding left u past the last bucket; take the last kept token with mass.
  for (std::size_t k = keep; k-- > 0;) {
    if (weights[k] > 0) return static_cast<Token>(order[k]);
  }
  return static_cast<Token>(order[0]);
}

Session::Session(const RqTransformer<float>& model, const SessionConfig& config, std::uint64_t stream_index)
    : model_(&model),
      config_(config),
      rng_(Rng::Stream(config.sampling.seed, stream_index)),
      history_(0, model.config().levels) {
  config_.sampling.Validate();
  if (config_.pad_frame && static_cast<int>(config_.pad_frame->size()) != model.config().levels) {
    throw std::invalid_argument("pad frame must have one token per level");
  }
  const int passes = config_.use_cfg ? 2 : 1;
  for (int p = 0; p < passes; ++p) caches_.push_back(model.NewTemporalCache());
}

std::vector<ConditionLabel> Session::PassLabels() const {
  if (config_.use_cfg) return {config_.cfg_good, config_.cfg_bad};
  return {config_.label};
}

void Session::Advance(const MultistreamFrame& frame) {
  history_.Append(frame);
  ++consumed_;
  if (state_ == SessionState::kSourceEnded && flush_left_ >= 0) {
    if (flush_left_ == 0) {
      state_ = SessionState::kFinished;
    } else {
      --flush_left_;
    }
    return;
  }
  if (state_ == SessionState::kRunning &&
      std::all_of(frame.source_audio.begin(), frame.source_audio.end(),
                  [](Token t) { return t == kAudioInputEos; })) {
    state_ = SessionState::kSourceEnded;
  }
}

MultistreamFrame Session::Step(std::span<const Token> source_frame) {
  Session* self[1] = {this};
  const std::vector<std::vector<Token>> frames = {std::vector<Token>(source_frame.begin(), source_frame.end())};
  return StepBatch(self, frames).front();
}

std::vector<MultistreamFrame> Session::StepBatch(std::span<Session* const> sessions,
                                                 std::span<const std::vector<Token>> source_frames) {
  if (sessions.size() != source_frames.size()) throw std::invalid_argument("one source frame per session");
  if (sessions.empty()) return {};
  const RqTransformer<float>& model = *sessions[0]->model_;
  const ModelConfig& mc = model.config();
  const int levels = mc.levels;

  std::vector<std::span<const Token>> prev;
  std::vector<ConditionLabel> labels;
  std::vector<TemporalCache<float>*> caches;
  std::vector<int> first_row(sessions.size());
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    Session& sess = *sessions[s];
    if (sess.model_ != &model) throw std::invalid_argument("batched sessions must share a model");
    if (sess.state_ == SessionState::kFinished) throw std::logic_error("step after the session finished");
    if (static_cast<int>(source_frames[s].size()) != levels) throw std::invalid_argument("source frame width mismatch");
    if (sess.history_.frames() >= mc.context_frames) {
      sess.context_exceeded_ = true;
      throw std::length_error("session exceeded the model context");
    }
    first_row[s] = static_cast<int>(labels.size());
    const auto pass_labels = sess.PassLabels();
    const int last = sess.history_.frames() - 1;
    for (std::size_t p = 0; p < pass_labels.size(); ++p) {
      prev.push_back(last < 0 ? std::span<const Token>() : sess.history_.row(last));
      labels.push_back(pass_labels[p]);
      caches.push_back(&sess.caches_[p]);
    }
  }
  const MatrixF z = model.TemporalStepBatch(prev, labels, caches);
  const MatrixF text_logits = model.TextLogitsBatch(z);

  auto combined = [&](const MatrixF& logits, std::size_t s) -> RowVector<float> {
    const Session& sess = *sessions[s];
    const int r = first_row[s];
    if (!sess.config_.use_cfg) return logits.row(r);
    return CfgCombine(RowVector<float>(logits.row(r)), RowVector<float>(logits.row(r + 1)),
                      static_cast<float>(sess.config_.sampling.cfg_gamma));
  };

  std::vector<MultistreamFrame> out(sessions.size());
  std::vector<Token> prev_tokens(labels.size());
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    Session& sess = *sessions[s];
    RowVector<float> logits = combined(text_logits, s);
    if (sess.config_.text_processor) sess.config_.text_processor(sess, logits);
    if (sess.state_ == SessionState::kRunning) logits[kTextEos] = -std::numeric_limits<float>::infinity();
    const auto& sc = sess.config_.sampling;
    out[s].text = SampleToken({logits.data(), static_cast<std::size_t>(logits.size())}, sc.temperature_text,
                              sc.top_k_text, sess.rng_);
    out[s].source_audio = source_frames[s];
    const int passes = sess.config_.use_cfg ? 2 : 1;
    for (int p = 0; p < passes; ++p) prev_tokens[first_row[s] + p] = out[s].text;
  }

  std::vector<DepthState<float>> states;
  states.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) states.push_back(model.NewDepthState(z.row(r)));
  std::vector<DepthState<float>*> state_ptrs;
  for (auto& st : states) state_ptrs.push_back(&st);

  // Only the output stream is sampled; the source positions would be
  // replaced by the real source tokens anyway.
  for (int q = 0; q < levels; ++q) {
    const MatrixF audio_logits = model.DepthStepBatch(prev_tokens, state_ptrs);
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      Session& sess = *sessions[s];
      const auto& sc = sess.config_.sampling;
      Token tok = kAudioDelayPad;
      // Acoustic levels hold the delay pad until the delay has elapsed.
      if (q == 0 || sess.history_.frames() >= mc.delay_steps) {
        const RowVector<float> logits = combined(audio_logits, s);
        tok = SampleToken({logits.data(), static_cast<std::size_t>(logits.size())}, sc.temperature_audio,
                          sc.top_k_audio, sess.rng_);
      }
      out[s].target_audio.push_back(tok);
      const int passes = sess.config_.use_cfg ? 2 : 1;
      for (int p = 0; p < passes; ++p) prev_tokens[first_row[s] + p] = tok;
    }
  }

  for (std::size_t s = 0; s < sessions.size(); ++s) {
    Session& sess = *sessions[s];
    const bool eos_now = sess.state_ == SessionState::kSourceEnded && sess.flush_left_ < 0 && out[s].text == kTextEos;
    sess.Advance(out[s]);
    if (eos_now) {
      const int flush = sess.config_.flush_frames >= 0 ? sess.config_.flush_frames : mc.delay_steps;
      if (flush == 0) {
        sess.state_ = SessionState::kFinished;
      } else {
        sess.flush_left_ = flush - 1;
      }
    }
  }
  return out;
}

namespace {

// Source feed of one sequence: the given frames, then an EOS frame if the
// source never ended, then the pad frame.
struct SourceFeed {
  const TokenGrid* source;
  std::vector<Token> eos_frame;
  std::optional<std::vector<Token>> pad;
  bool eos_seen = false;
  int next = 0;

  std::vector<Token> Next() {
    std::vector<Token> f;
    if (next < source->frames) {
      const auto row = source->frame(next);
      f.assign(row.begin(), row.end());
    } else if (!eos_seen) {
      f = eos_frame;
    } else {
      f = pad ? *pad : eos_frame;
    }
    ++next;
    if (std::all_of(f.begin(), f.end(), [](Token t) { return t == kAudioInputEos; })) eos_seen = true;
    return f;
  }
};

}  // namespace

std::vector<SessionResult> RunBatched(const RqTransformer<float>& model, std::span<const TokenGrid> sources,
                                      const SessionConfig& config, const BatchOptions& options) {
  const int batch = static_cast<int>(sources.size());
  if (!options.pad_frames.empty() && options.pad_frames.size() != sources.size()) {
    throw std::invalid_argument("one pad frame per source expected");
  }
  const int levels = model.config().levels;
  std::vector<Session> sessions;
  std::vector<SourceFeed> feeds;
  std::vector<SessionResult> results(batch);
  sessions.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    if (sources[b].frames < 1) throw std::invalid_argument("empty source");
    if (sources[b].levels != levels) throw std::invalid_argument("source level count differs from the model");
    sessions.emplace_back(model, config, options.first_stream + static_cast<std::uint64_t>(b));
    feeds.push_back({&sources[b], std::vector<Token>(levels, kAudioInputEos),
                     options.pad_frames.empty() ? config.pad_frame : options.pad_frames[b]});
  }
  std::vector<bool> active(batch, true);
  while (true) {
    std::vector<Session*> step_sessions;
    std::vector<std::vector<Token>> step_frames;
    std::vector<int> ids;
    for (int b = 0; b < batch; ++b) {
      if (!active[b]) continue;
      Session& s = sessions[b];
      const bool capped = s.frames_emitted() >= sources[b].frames + config.cap_extra;
      const bool context_full = s.frames_emitted() >= model.config().context_frames;
      if (s.state() == SessionState::kFinished || capped || context_full) {
        active[b] = false;
        results[b].finished = s.state() == SessionState::kFinished;
        results[b].truncated = !results[b].finished;
        continue;
      }
      step_sessions.push_back(&s);
      step_frames.push_back(feeds[b].Next());
      ids.push_back(b);
    }
    if (step_sessions.empty()) break;
    const auto t0 = std::chrono::steady_clock::now();
    const auto frames = Session::StepBatch(step_sessions, step_frames);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& r = results[ids[k]];
      r.frame_wall_s.push_back(dt);
      if (frames[k].text == kTextEos && r.text_eos_frame < 0 && sessions[ids[k]].state() != SessionState::kRunning) {
        r.text_eos_frame = sessions[ids[k]].frames_emitted() - 1;
      }
    }
  }
  for (int b = 0; b < batch; ++b) {
    auto& r = results[b];
    r.frames = sessions[b].history();
    r.wall_s = std::accumulate(r.frame_wall_s.begin(), r.frame_wall_s.end(), 0.0);
    r.rtf = r.wall_s > 0 ? r.frames.frames() / (config.frame_rate_hz * r.wall_s) : 0.0;
  }
  return results;
}

SessionResult RunSession(const RqTransformer<float>& model, const TokenGrid& source, const SessionConfig& config,
                         std::uint64_t stream_index) {
  Session session(model, config, stream_index);
  SourceFeed feed{&source, std::vector<Token>(model.config().levels, kAudioInputEos), config.pad_frame};
  if (source.frames < 1) throw std::invalid_argument("empty source");
  if (source.levels != model.config().levels) throw std::invalid_argument("source level count differs from the model");
  SessionResult r;
  while (true) {
    if (session.state() == SessionState::kFinished) {
      r.finished = true;
      break;
    }
    if (session.frames_emitted() >= source.frames + config.cap_extra ||
        session.frames_emitted() >= model.config().context_frames) {
      r.truncated = true;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto frame = session.Step(feed.Next());
    r.frame_wall_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (frame.text == kTextEos && r.text_eos_frame < 0 && session.state() != SessionState::kRunning) {
      r.text_eos_frame = session.frames_emitted() - 1;
    }
  }
  r.frames = session.history();
  r.wall_s = std::accumulate(r.frame_wall_s.begin(), r.frame_wall_s.end(), 0.0);
  r.rtf = r.wall_s > 0 ? r.frames.frames() / (config.frame_rate_hz * r.wall_s) : 0.0;
  return r;
}

std::vector<BenchRow> RunBench(const RqTransformer<float>& model, const TokenGrid& source,
                               std::span<const int> batch_sizes, const SessionConfig& config) {
  std::vector<BenchRow> rows;
  for (const bool cfg : {false, true}) {
    for (const int b : batch_sizes) {
      if (b < 1) throw std::invalid_argument("batch sizes must be >= 1");
      SessionConfig c = config;
      c.use_cfg = cfg;
      const std::vector<TokenGrid> sources(static_cast<std::size_t>(b), source);
      const auto t0 = std::chrono::steady_clock::now();
      const auto results = RunBatched(model, sources, c);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      double frames = 0;
      for (const auto& r : results) frames += r.frames.frames();
      BenchRow row;
      row.batch = b;
      row.cfg = cfg;
      row.wall_s = wall;
      row.rtf = wall > 0 ? frames / (config.frame_rate_hz * wall) : 0.0;
      row.per_sequence_rtf = row.rtf / b;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string BenchCsv(std::span<const BenchRow> rows) {
  std::ostringstream os;
  os << "batch,cfg,wall_s,rtf,per_sequence_rtf\n";
  for (const auto& r : rows) {
    os << r.batch << ',' << (r.cfg ? 1 : 0) << ',' << r.wall_s << ',' << r.rtf << ',' << r.per_sequence_rtf << '\n';
  }
  return os.str();
}

}  // namespace simtrans
