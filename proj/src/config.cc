#include "simtrans/config.h"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "simtrans/errors.h"

namespace simtrans {

namespace {

using nlohmann::json;

// Reads fields out of a JSON object tree, remembering which keys were used so
// leftovers can be reported.
class Reader {
 public:
  explicit Reader(const json& root) { stack_.push_back({&root, "", {}}); }

  void Section(const std::string& name, const std::function<void()>& body) {
    Frame& top = stack_.back();
    top.seen.insert(name);
    const auto it = top.node->find(name);
    if (it == top.node->end()) return;
    const std::string path = Join(top.path, name);
    if (!it->is_object()) throw ConfigError(path + ": expected an object");
    stack_.push_back({&*it, path, {}});
    body();
    Finish();
    stack_.pop_back();
  }

  template <typename T>
  void Field(const std::string& name, T& value) {
    Frame& top = stack_.back();
    top.seen.insert(name);
    const auto it = top.node->find(name);
    if (it == top.node->end()) return;
    const std::string path = Join(top.path, name);
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(path + ": expected a boolean");
      value = it->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned() || it->get<std::int64_t>() >= 0) {
          value = it->get<T>();
        } else {
          throw ConfigError(path + ": expected a non-negative integer");
        }
      } else {
        const auto v = it->get<std::int64_t>();
        if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) {
          throw ConfigError(path + ": integer out of range");
        }
        value = static_cast<T>(v);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(path + ": expected a number");
      value = it->get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(path + ": expected a string");
      value = it->get<std::string>();
    } else if constexpr (std::is_same_v<T, LagRegime>) {
      if (!it->is_string()) throw ConfigError(path + ": expected a regime name");
      try {
        value = ParseRegime(it->get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
      }
    } else if constexpr (std::is_same_v<T, ConditionLabel>) {
      if (!it->is_string()) throw ConfigError(path + ": expected a label name");
      try {
        value = ParseLabel(it->get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

  void Finish() {
    const Frame& top = stack_.back();
    for (const auto& [key, _] : top.node->items()) {
      if (!top.seen.contains(key)) throw ConfigError(Join(top.path, key) + ": unknown key");
    }
  }

 private:
  struct Frame {
    const json* node;
    std::string path;
    std::set<std::string> seen;
  };
  std::vector<Frame> stack_;

  static std::string Join(const std::string& path, const std::string& name) {
    return path.empty() ? name : path + "." + name;
  }
};

class Writer {
 public:
  void Section(const std::string& name, const std::function<void()>& body) {
    json* parent = stack_.back();
    json& child = (*parent)[name] = json::object();
    stack_.push_back(&child);
    body();
    stack_.pop_back();
  }

  template <typename T>
  void Field(const std::string& name, T& value) {
    if constexpr (std::is_same_v<T, LagRegime>) {
      (*stack_.back())[name] = RegimeName(value);
    } else if constexpr (std::is_same_v<T, ConditionLabel>) {
      (*stack_.back())[name] = LabelName(value);
    } else {
      (*stack_.back())[name] = value;
    }
  }

  const json& root() const { return root_; }

 private:
  json root_ = json::object();
  std::vector<json*> stack_{&root_};
};

// The one place that lists the document layout.
template <typename Visitor>
void Visit(Visitor& v, RunConfig& c) {
  ExperimentConfig& e = c.experiment;
  v.Field("seed", e.seed);
  v.Section("codec", [&] {
    CodecConfig& k = e.task.codec;
    v.Field("frame_rate_hz", k.frame_rate_hz);
    v.Field("sample_rate_hz", k.sample_rate_hz);
    v.Field("latent_dim", k.latent_dim);
    v.Field("num_levels", k.num_levels);
    v.Field("codebook_size", k.codebook_size);
    v.Field("featurizer_seed", k.featurizer_seed);
    v.Field("train_sentences", e.codec_sentences);
    v.Field("train_steps", e.codec_steps);
  });
  v.Section("task", [&] {
    TaskSpec& t = e.task;
    v.Field("vocab_size", t.vocab_size);
    v.Field("min_words", t.min_words);
    v.Field("max_words", t.max_words);
    v.Field("min_word_frames", t.min_word_frames);
    v.Field("max_word_frames", t.max_word_frames);
    v.Field("min_gap_frames", t.min_gap_frames);
    v.Field("max_gap_frames", t.max_gap_frames);
    v.Field("min_lead_frames", t.min_lead_frames);
    v.Field("max_lead_frames", t.max_lead_frames);
    v.Field("reorder", t.reorder);
    v.Field("regime", t.regime);
    v.Field("constant_lag_s", t.constant_lag_s);
    v.Field("min_lag_s", t.min_lag_s);
    v.Field("num_speakers", t.num_speakers);
    v.Field("speaker_amplitude", t.speaker_amplitude);
    v.Field("same_speaker_prob", t.same_speaker_prob);
    v.Field("delay_steps", t.delay_steps);
    v.Field("tail_frames", t.tail_frames);
    v.Field("seed", t.seed);
  });
  v.Section("model", [&] {
    ModelConfig& m = e.model;
    v.Field("d_model", m.d_model);
    v.Field("n_layers", m.n_layers);
    v.Field("n_heads", m.n_heads);
    v.Field("ffn_dim", m.ffn_dim);
    v.Field("context_frames", m.context_frames);
    v.Field("d_depth", m.d_depth);
    v.Field("depth_layers", m.depth_layers);
    v.Field("depth_heads", m.depth_heads);
    v.Field("depth_ffn_dim", m.depth_ffn_dim);
    v.Field("depth_share_from", m.depth_share_from);
    v.Field("rope_base", m.rope_base);
  });
  v.Section("training", [&] {
    v.Field("train_examples", e.train_examples);
    v.Field("eval_examples", e.eval_examples);
    v.Field("steps", e.steps);
    v.Field("batch_size", e.batch_size);
    v.Field("token_dropout", e.token_dropout);
    v.Field("time_budget_s", e.time_budget_s);
    v.Section("optimizer", [&] {
      OptimizerConfig& o = e.optimizer;
      v.Field("learning_rate", o.learning_rate);
      v.Field("beta1", o.beta1);
      v.Field("beta2", o.beta2);
      v.Field("weight_decay", o.weight_decay);
      v.Field("eps", o.eps);
      v.Field("warmup_steps", o.warmup_steps);
      v.Field("decay_steps", o.decay_steps);
      v.Field("min_lr_fraction", o.min_lr_fraction);
      v.Field("grad_clip", o.grad_clip);
    });
    v.Section("loss", [&] {
      v.Field("text", e.loss.text);
      v.Field("audio_out", e.loss.audio_out);
      v.Field("audio_in", e.loss.audio_in);
    });
  });
  v.Section("alignment", [&] {
    v.Field("window", c.alignment.spikes.window);
    v.Field("threshold", c.alignment.spikes.threshold);
    v.Field("em_iterations", c.alignment.em_iterations);
    v.Field("threads", c.alignment.threads);
  });
  v.Section("sampling", [&] {
    SamplingConfig& s = c.decode.sampling;
    v.Field("temperature_audio", s.temperature_audio);
    v.Field("temperature_text", s.temperature_text);
    v.Field("top_k_audio", s.top_k_audio);
    v.Field("top_k_text", s.top_k_text);
    v.Field("cfg_gamma", s.cfg_gamma);
    v.Field("seed", s.seed);
    v.Field("use_cfg", c.decode.use_cfg);
    v.Field("label", c.decode.label);
    v.Field("cap_extra", c.decode.cap_extra);
    v.Field("flush_frames", c.decode.flush_frames);
  });
  v.Section("paths", [&] { v.Field("out_dir", c.paths.out_dir); });
}

template <typename Fn>
void Check(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void Require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

RunConfig::RunConfig() {
  // Settings that reach the accuracy target on the synthetic task.
  experiment.loss = {5.0, 1.0, 0.3};
  experiment.train_examples = 4096;
  experiment.steps = 6000;
  experiment.optimizer.decay_steps = 6000;
}

void RunConfig::Resolve() {
  Check("codec", [&] { experiment.task.codec.Validate(); });
  Check("task", [&] { experiment.task.Validate(); });
  const SyntheticTask t(experiment.task);
  const ModelConfig derived = t.SuggestedModel();
  ModelConfig& m = experiment.model;
  m.levels = derived.levels;
  m.text_vocab = derived.text_vocab;
  m.audio_vocab = derived.audio_vocab;
  m.delay_steps = derived.delay_steps;
  Check("model", [&] { m.Validate(); });

  Require(experiment.codec_sentences > 0, "codec.train_sentences", "must be positive");
  Require(experiment.codec_steps > 0, "codec.train_steps", "must be positive");
  Require(experiment.train_examples > 0, "training.train_examples", "must be positive");
  Require(experiment.eval_examples > 0, "training.eval_examples", "must be positive");
  Require(experiment.steps > 0, "training.steps", "must be positive");
  Require(experiment.batch_size > 0, "training.batch_size", "must be positive");
  Require(experiment.token_dropout >= 0 && experiment.token_dropout < 1, "training.token_dropout",
          "must be in [0, 1)");
  Require(experiment.time_budget_s >= 0, "training.time_budget_s", "must be non-negative");
  const OptimizerConfig& o = experiment.optimizer;
  Require(o.learning_rate > 0, "training.optimizer.learning_rate", "must be positive");
  Require(o.beta1 >= 0 && o.beta1 < 1, "training.optimizer.beta1", "must be in [0, 1)");
  Require(o.beta2 >= 0 && o.beta2 < 1, "training.optimizer.beta2", "must be in [0, 1)");
  Require(o.weight_decay >= 0, "training.optimizer.weight_decay", "must be non-negative");
  Require(o.eps > 0, "training.optimizer.eps", "must be positive");
  Require(o.warmup_steps >= 0, "training.optimizer.warmup_steps", "must be non-negative");
  Require(o.decay_steps >= 0, "training.optimizer.decay_steps", "must be non-negative");
  Require(o.min_lr_fraction >= 0 && o.min_lr_fraction <= 1, "training.optimizer.min_lr_fraction",
          "must be in [0, 1]");
  const LossWeights& l = experiment.loss;
  Require(l.text >= 0 && l.audio_out >= 0 && l.audio_in >= 0 && l.text + l.audio_out + l.audio_in > 0,
          "training.loss", "weights must be non-negative and not all zero");
  Require(alignment.spikes.window >= 1, "alignment.window", "must be at least 1");
  Require(alignment.spikes.threshold >= 0, "alignment.threshold", "must be non-negative");
  Require(alignment.em_iterations >= 1, "alignment.em_iterations", "must be at least 1");
  Require(alignment.threads >= 1, "alignment.threads", "must be at least 1");
  Check("sampling", [&] { decode.sampling.Validate(); });
  Require(decode.cap_extra >= 0, "sampling.cap_extra", "must be non-negative");
  Require(decode.flush_frames >= -1, "sampling.flush_frames", "must be -1 or non-negative");
  Require(!paths.out_dir.empty(), "paths.out_dir", "must not be empty");
}

SessionConfig RunConfig::Session() const {
  SessionConfig s;
  s.sampling = decode.sampling;
  s.use_cfg = decode.use_cfg;
  s.label = decode.label;
  s.cap_extra = decode.cap_extra;
  s.flush_frames = decode.flush_frames;
  s.frame_rate_hz = experiment.task.codec.frame_rate_hz;
  return s;
}

RunConfig ParseRunConfig(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig config;
  Reader reader(doc);
  Visit(reader, config);
  reader.Finish();
  config.Resolve();
  return config;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

std::string RunConfigToJson(const RunConfig& config) {
  RunConfig copy = config;
  Writer writer;
  Visit(writer, copy);
  return writer.root().dump(2);
}

void ApplySeedOverride(RunConfig& config) {
  const char* env = std::getenv("SIMTRANS_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-') {
    throw ConfigError(std::string("SIMTRANS_SEED: not an unsigned integer: ") + env);
  }
  config.experiment.seed = v;
  config.experiment.task.seed = v;
  config.decode.sampling.seed = v;
}

}  // namespace simtrans
