#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simtrans/autograd.h"
#include "simtrans/labels.h"
#include "simtrans/rng.h"
#include "simtrans/streams.h"
#include "simtrans/tensor.h"

namespace simtrans {

struct ModelConfig {
  // Temporal transformer.
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_dim = 128;
  int context_frames = 256;
  // Depth transformer.
  int d_depth = 32;
  int depth_layers = 1;
  int depth_heads = 2;
  int depth_ffn_dim = 64;
  // Streams.
  int levels = 2;         // Q per audio stream
  int text_vocab = 32;    // N_W, includes the reserved text ids
  int audio_vocab = 35;   // N_A, includes the reserved audio ids
  int delay_steps = 2;
  // Levels >= this (1-based) share depth embeddings and heads; 0 disables.
  int depth_share_from = 0;
  double rope_base = 10000.0;

  void Validate() const;
  int depth_positions() const { return 2 * levels; }
  int levels_per_stream_slots() const;
  int num_depth_slots() const { return 2 * levels_per_stream_slots(); }
  // Parameter slot used by depth position p in 1..2Q.
  int DepthSlot(int position) const;
};

template <typename Scalar>
struct TransformerLayerWeights {
  Matrix<Scalar> attn_norm, wq, wk, wv, wo, mlp_norm, w_gate, w_up, w_down;
};

template <typename Scalar>
struct RqWeights {
  Matrix<Scalar> text_emb;                // N_W x D
  std::vector<Matrix<Scalar>> audio_emb;  // 2Q tables, N_A x D
  Matrix<Scalar> label_emb;               // 5 x D
  std::vector<TransformerLayerWeights<Scalar>> temporal;
  Matrix<Scalar> temporal_norm;  // 1 x D
  Matrix<Scalar> text_head;      // D x N_W

  Matrix<Scalar> depth_in;                  // D x Dd
  Matrix<Scalar> depth_text_emb;            // N_W x Dd, input of position 1
  std::vector<Matrix<Scalar>> depth_emb;    // per slot, N_A x Dd
  Matrix<Scalar> depth_pos;                 // 2Q x Dd
  std::vector<TransformerLayerWeights<Scalar>> depth;
  Matrix<Scalar> depth_norm;                // 1 x Dd
  std::vector<Matrix<Scalar>> depth_heads;  // per slot, Dd x N_A

  static RqWeights Init(const ModelConfig& config, Rng& rng);
  // Same shapes, all zeros.
  static RqWeights ZerosLike(const RqWeights& other);

  template <typename F>
  void ForEach(F&& f) {
    ForEachImpl(*this, f);
  }
  template <typename F>
  void ForEach(F&& f) const {
    ForEachImpl(*this, f);
  }

  std::size_t NumParameters() const;

  template <typename Other>
  RqWeights<Other> Cast() const;

 private:
  template <typename Self, typename F>
  static void ForEachImpl(Self& self, F& f) {
    auto layer = [&f](const std::string& prefix, auto& l) {
      f(prefix + ".attn_norm", l.attn_norm);
      f(prefix + ".wq", l.wq);
      f(prefix + ".wk", l.wk);
      f(prefix + ".wv", l.wv);
      f(prefix + ".wo", l.wo);
      f(prefix + ".mlp_norm", l.mlp_norm);
      f(prefix + ".w_gate", l.w_gate);
      f(prefix + ".w_up", l.w_up);
      f(prefix + ".w_down", l.w_down);
    };
    f(std::string("text_emb"), self.text_emb);
    for (std::size_t i = 0; i < self.audio_emb.size(); ++i) f("audio_emb." + std::to_string(i), self.audio_emb[i]);
    f(std::string("label_emb"), self.label_emb);
    for (std::size_t i = 0; i < self.temporal.size(); ++i) layer("temporal." + std::to_string(i), self.temporal[i]);
    f(std::string("temporal_norm"), self.temporal_norm);
    f(std::string("text_head"), self.text_head);
    f(std::string("depth_in"), self.depth_in);
    f(std::string("depth_text_emb"), self.depth_text_emb);
    for (std::size_t i = 0; i < self.depth_emb.size(); ++i) f("depth_emb." + std::to_string(i), self.depth_emb[i]);
    f(std::string("depth_pos"), self.depth_pos);
    for (std::size_t i = 0; i < self.depth.size(); ++i) layer("depth." + std::to_string(i), self.depth[i]);
    f(std::string("depth_norm"), self.depth_norm);
    for (std::size_t i = 0; i < self.depth_heads.size(); ++i) f("depth_heads." + std::to_string(i), self.depth_heads[i]);
  }
};

template <typename Scalar>
template <typename Other>
RqWeights<Other> RqWeights<Scalar>::Cast() const {
  auto mat = [](const Matrix<Scalar>& m) { return Matrix<Other>(m.template cast<Other>()); };
  auto layer = [&mat](const TransformerLayerWeights<Scalar>& l) {
    return TransformerLayerWeights<Other>{mat(l.attn_norm), mat(l.wq),       mat(l.wk),
                                          mat(l.wv),        mat(l.wo),       mat(l.mlp_norm),
                                          mat(l.w_gate),    mat(l.w_up),     mat(l.w_down)};
  };
  RqWeights<Other> out;
  out.text_emb = mat(text_emb);
  for (const auto& m : audio_emb) out.audio_emb.push_back(mat(m));
  out.label_emb = mat(label_emb);
  for (const auto& l : temporal) out.temporal.push_back(layer(l));
  out.temporal_norm = mat(temporal_norm);
  out.text_head = mat(text_head);
  out.depth_in = mat(depth_in);
  out.depth_text_emb = mat(depth_text_emb);
  for (const auto& m : depth_emb) out.depth_emb.push_back(mat(m));
  out.depth_pos = mat(depth_pos);
  for (const auto& l : depth) out.depth.push_back(layer(l));
  out.depth_norm = mat(depth_norm);
  for (const auto& m : depth_heads) out.depth_heads.push_back(mat(m));
  return out;
}

// Inputs and next-token targets of one training sequence. Row t of `targets`
// is what the model predicts at frame t having seen rows < t of `inputs` and,
// inside the frame, the earlier depth positions of row t of `inputs`.
struct TrainingExample {
  Multistream inputs;
  Multistream targets;
  ConditionLabel label = ConditionLabel::kVeryGood;

  static TrainingExample FromStreams(Multistream streams, ConditionLabel label) {
    TrainingExample ex{streams, std::move(streams), label};
    return ex;
  }
};

// Graph-side view of the weights for one forward pass.
template <typename Scalar>
struct BoundWeights {
  struct Layer {
    ag::Var attn_norm, wq, wk, wv, wo, mlp_norm, w_gate, w_up, w_down;
  };
  ag::Var text_emb, label_emb, temporal_norm, text_head;
  std::vector<ag::Var> audio_emb;
  std::vector<Layer> temporal;
  ag::Var depth_in, depth_text_emb, depth_pos, depth_norm;
  std::vector<ag::Var> depth_emb, depth_heads;
  std::vector<Layer> depth;
};

template <typename Scalar>
BoundWeights<Scalar> Bind(ag::Graph<Scalar>& graph, const RqWeights<Scalar>& weights,
                          RqWeights<Scalar>* grads);

template <typename Scalar>
struct TeacherForcedLogits {
  ag::Var text;                // T x N_W
  std::vector<ag::Var> audio;  // per depth position 1..2Q: T x N_A
};

// One-shot pass over a whole sequence with teacher forcing.
template <typename Scalar>
TeacherForcedLogits<Scalar> ForwardTeacherForced(ag::Graph<Scalar>& graph,
                                                 const BoundWeights<Scalar>& weights,
                                                 const ModelConfig& config,
                                                 const Multistream& inputs, ConditionLabel label);

// Keys and values of the temporal positions processed so far.
template <typename Scalar>
struct TemporalCache {
  std::vector<Matrix<Scalar>> keys;
  std::vector<Matrix<Scalar>> values;
  int length = 0;
};

// Per-frame depth transformer state.
template <typename Scalar>
struct DepthState {
  RowVector<Scalar> z_proj;
  std::vector<Matrix<Scalar>> keys;
  std::vector<Matrix<Scalar>> values;
  int length = 0;  // depth positions (1..2Q) processed
};

// Toy temporal + depth hierarchical model. The inference methods use fixed
// accumulation orders, so incremental, recomputed and batched evaluation agree
// bit for bit.
template <typename Scalar>
class RqTransformer {
 public:
  RqTransformer(const ModelConfig& config, std::uint64_t seed);
  RqTransformer(const ModelConfig& config, RqWeights<Scalar> weights);

  const ModelConfig& config() const { return config_; }
  const RqWeights<Scalar>& weights() const { return weights_; }
  RqWeights<Scalar>& mutable_weights() { return weights_; }

  TemporalCache<Scalar> NewTemporalCache() const;

  // Z for the frame following `prefix`. Frames of the prefix not yet in the
  // cache are fed first; an empty prefix takes the BOS path.
  RowVector<Scalar> TemporalForward(const Multistream& prefix, ConditionLabel label,
                                    TemporalCache<Scalar>& cache) const;

  // One temporal position for each of B streams. prev_frames[b] is the frame
  // fed at this position (width 1 + 2Q) or empty for BOS. Returns B x D.
  Matrix<Scalar> TemporalStepBatch(std::span<const std::span<const Token>> prev_frames,
                                   std::span<const ConditionLabel> labels,
                                   std::span<TemporalCache<Scalar>* const> caches) const;

  // Logits for depth position tokens_so_far.size(): text logits at 0, audio
  // logits at 1..2Q. tokens_so_far[0] is the text token of the frame.
  RowVector<Scalar> DepthForward(const RowVector<Scalar>& z,
                                 std::span<const Token> tokens_so_far) const;

  Matrix<Scalar> TextLogitsBatch(const Matrix<Scalar>& z) const;
  DepthState<Scalar> NewDepthState(const RowVector<Scalar>& z) const;
  // Feeds the previous token of each stream and returns the audio logits of
  // the next depth position, B x N_A.
  Matrix<Scalar> DepthStepBatch(std::span<const Token> prev_tokens,
                                std::span<DepthState<Scalar>* const> states) const;

 private:
  ModelConfig config_;
  RqWeights<Scalar> weights_;
};

// RQT1: magic, config JSON (length-prefixed), extra metadata JSON, then u32
// tensor count and per tensor: name, u32 rank, u32 dims, f32 data.
void SaveCheckpoint(const std::string& path, const ModelConfig& config,
                    const RqWeights<float>& weights, const std::string& metadata_json = "{}");
struct Checkpoint {
  ModelConfig config;
  RqWeights<float> weights;
  std::string metadata_json;
};
Checkpoint LoadCheckpoint(const std::string& path);
void WriteCheckpoint(std::ostream& os, const ModelConfig& config, const RqWeights<float>& weights,
                     const std::string& metadata_json = "{}");
Checkpoint ReadCheckpoint(std::istream& is);

}  // namespace simtrans
