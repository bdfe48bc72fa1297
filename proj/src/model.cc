#include "simtrans/model.h"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "simtrans/binary_io.h"
#include "simtrans/errors.h"

namespace simtrans {

namespace {

constexpr std::string_view kLabelNames[kNumConditionLabels] = {"very_bad", "bad", "neutral", "good",
                                                               "very_good"};

// y = x * w with every output element accumulated over the inner index in
// ascending order, independently of the number of rows.
template <typename S>
void RowMatMul(const Matrix<S>& x, const Matrix<S>& w, Matrix<S>& y) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index inner = x.cols();
  const Eigen::Index cols = w.cols();
  y.setZero(rows, cols);
  for (Eigen::Index i = 0; i < inner; ++i) {
    const S* wr = w.data() + i * cols;
    for (Eigen::Index b = 0; b < rows; ++b) {
      const S xi = x(b, i);
      S* yr = y.data() + b * cols;
      for (Eigen::Index j = 0; j < cols; ++j) yr[j] += xi * wr[j];
    }
  }
}

template <typename S>
void RmsNormRows(const Matrix<S>& x, const Matrix<S>& gain, Matrix<S>& y) {
  y.resize(x.rows(), x.cols());
  const Eigen::Index n = x.cols();
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    S ss = 0;
    for (Eigen::Index c = 0; c < n; ++c) ss += x(b, c) * x(b, c);
    const S inv = S(1) / std::sqrt(ss / S(n) + S(1e-6));
    for (Eigen::Index c = 0; c < n; ++c) y(b, c) = x(b, c) * inv * gain(0, c);
  }
}

template <typename S>
void RopeRow(S* row, int position, int num_heads, int head_dim, double base) {
  for (int i = 0; i < head_dim / 2; ++i) {
    const double angle = position * std::pow(base, -2.0 * i / head_dim);
    const S c = static_cast<S>(std::cos(angle));
    const S s = static_cast<S>(std::sin(angle));
    for (int h = 0; h < num_heads; ++h) {
      const int k = h * head_dim + 2 * i;
      const S x0 = row[k];
      const S x1 = row[k + 1];
      row[k] = x0 * c - x1 * s;
      row[k + 1] = x0 * s + x1 * c;
    }
  }
}

// Attention of one query row over key/value rows [lo, hi).
template <typename S>
void AttendRow(const S* query, const Matrix<S>& keys, const Matrix<S>& values, int lo, int hi,
               int num_heads, S* out) {
  const int dim = static_cast<int>(keys.cols());
  const int head_dim = dim / num_heads;
  const S scale = S(1) / std::sqrt(S(head_dim));
  std::vector<S> scores(static_cast<std::size_t>(hi - lo));
  for (int h = 0; h < num_heads; ++h) {
    const int off = h * head_dim;
    S mx = -std::numeric_limits<S>::infinity();
    for (int j = lo; j < hi; ++j) {
      S dot = 0;
      const S* kr = keys.data() + static_cast<Eigen::Index>(j) * dim + off;
      for (int c = 0; c < head_dim; ++c) dot += query[off + c] * kr[c];
      scores[j - lo] = dot * scale;
      mx = std::max(mx, scores[j - lo]);
    }
    S sum = 0;
    for (int j = lo; j < hi; ++j) {
      scores[j - lo] = std::exp(scores[j - lo] - mx);
      sum += scores[j - lo];
    }
    for (int c = 0; c < head_dim; ++c) out[off + c] = 0;
    for (int j = lo; j < hi; ++j) {
      const S p = scores[j - lo] / sum;
      const S* vr = values.data() + static_cast<Eigen::Index>(j) * dim + off;
      for (int c = 0; c < head_dim; ++c) out[off + c] += p * vr[c];
    }
  }
}

// One transformer layer over B rows, each attending to its own cache.
// Key/value rows for the new positions are written at row `slot[b]` of
// keys[b] / values[b]; attention covers rows [lo[b], slot[b]].
template <typename S>
void LayerStep(const TransformerLayerWeights<S>& w, int num_heads, bool rope, double rope_base,
               std::span<const int> positions, std::span<const int> lo, std::span<const int> slot,
               std::span<Matrix<S>* const> keys, std::span<Matrix<S>* const> values, Matrix<S>& x) {
  const Eigen::Index batch = x.rows();
  const int dim = static_cast<int>(x.cols());
  Matrix<S> h, q, k, v, attn, proj, gate, up;
  RmsNormRows(x, w.attn_norm, h);
  RowMatMul(h, w.wq, q);
  RowMatMul(h, w.wk, k);
  RowMatMul(h, w.wv, v);
  attn.resize(batch, dim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (rope) {
      RopeRow(q.data() + b * dim, positions[b], num_heads, dim / num_heads, rope_base);
      RopeRow(k.data() + b * dim, positions[b], num_heads, dim / num_heads, rope_base);
    }
    keys[b]->row(slot[b]) = k.row(b);
    values[b]->row(slot[b]) = v.row(b);
    AttendRow(q.data() + b * dim, *keys[b], *values[b], lo[b], slot[b] + 1, num_heads,
              attn.data() + b * dim);
  }
  RowMatMul(attn, w.wo, proj);
  x += proj;
  RmsNormRows(x, w.mlp_norm, h);
  RowMatMul(h, w.w_gate, gate);
  RowMatMul(h, w.w_up, up);
  for (Eigen::Index i = 0; i < gate.size(); ++i) {
    const S a = gate.data()[i];
    gate.data()[i] = a / (S(1) + std::exp(-a)) * up.data()[i];
  }
  RowMatMul(gate, w.w_down, proj);
  x += proj;
}

template <typename S>
Matrix<S> RandomMatrix(Rng& rng, int rows, int cols, double stddev) {
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(stddev * rng.Normal());
  return m;
}

template <typename S>
TransformerLayerWeights<S> InitLayer(Rng& rng, int dim, int ffn, int total_layers) {
  const double in_std = 1.0 / std::sqrt(static_cast<double>(dim));
  const double out_scale = 1.0 / std::sqrt(2.0 * total_layers);
  TransformerLayerWeights<S> l;
  l.attn_norm = Matrix<S>::Ones(1, dim);
  l.wq = RandomMatrix<S>(rng, dim, dim, in_std);
  l.wk = RandomMatrix<S>(rng, dim, dim, in_std);
  l.wv = RandomMatrix<S>(rng, dim, dim, in_std);
  l.wo = RandomMatrix<S>(rng, dim, dim, in_std * out_scale);
  l.mlp_norm = Matrix<S>::Ones(1, dim);
  l.w_gate = RandomMatrix<S>(rng, dim, ffn, in_std);
  l.w_up = RandomMatrix<S>(rng, dim, ffn, in_std);
  l.w_down = RandomMatrix<S>(rng, ffn, dim, out_scale / std::sqrt(static_cast<double>(ffn)));
  return l;
}

template <typename S>
typename BoundWeights<S>::Layer BindLayer(ag::Graph<S>& g, const TransformerLayerWeights<S>& w,
                                          TransformerLayerWeights<S>* grads) {
  auto p = [&g](const Matrix<S>& m, Matrix<S>* sink) { return g.Param(m, sink); };
  auto sink = [grads](Matrix<S> TransformerLayerWeights<S>::*member) -> Matrix<S>* {
    return grads != nullptr ? &(grads->*member) : nullptr;
  };
  using L = TransformerLayerWeights<S>;
  return {p(w.attn_norm, sink(&L::attn_norm)), p(w.wq, sink(&L::wq)),
          p(w.wk, sink(&L::wk)),               p(w.wv, sink(&L::wv)),
          p(w.wo, sink(&L::wo)),               p(w.mlp_norm, sink(&L::mlp_norm)),
          p(w.w_gate, sink(&L::w_gate)),       p(w.w_up, sink(&L::w_up)),
          p(w.w_down, sink(&L::w_down))};
}

template <typename S>
ag::Var GraphLayer(ag::Graph<S>& g, const typename BoundWeights<S>::Layer& w, int num_heads,
                   bool rope, double rope_base, const ag::AttentionLayout& layout, ag::Var x) {
  ag::Var h = g.RmsNorm(x, w.attn_norm);
  ag::Var q = g.MatMul(h, w.wq);
  ag::Var k = g.MatMul(h, w.wk);
  ag::Var v = g.MatMul(h, w.wv);
  if (rope) {
    q = g.Rope(q, layout.position, num_heads, rope_base);
    k = g.Rope(k, layout.position, num_heads, rope_base);
  }
  ag::Var a = g.Attention(q, k, v, num_heads, layout);
  x = g.Add(x, g.MatMul(a, w.wo));
  ag::Var h2 = g.RmsNorm(x, w.mlp_norm);
  ag::Var m = g.SiluGate(g.MatMul(h2, w.w_gate), g.MatMul(h2, w.w_up));
  return g.Add(x, g.MatMul(m, w.w_down));
}

}  // namespace

std::string_view LabelName(ConditionLabel label) { return kLabelNames[static_cast<int>(label)]; }

ConditionLabel ParseLabel(std::string_view name) {
  for (int i = 0; i < kNumConditionLabels; ++i) {
    if (kLabelNames[i] == name) return static_cast<ConditionLabel>(i);
  }
  throw std::invalid_argument("unknown condition label '" + std::string(name) + "'");
}

void ModelConfig::Validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
  };
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(ffn_dim, "ffn_dim");
  positive(context_frames, "context_frames");
  positive(d_depth, "d_depth");
  positive(depth_layers, "depth_layers");
  positive(depth_heads, "depth_heads");
  positive(depth_ffn_dim, "depth_ffn_dim");
  positive(levels, "levels");
  if (d_model % n_heads != 0 || (d_model / n_heads) % 2 != 0) {
    throw std::invalid_argument("d_model must split into even-sized heads");
  }
  if (d_depth % depth_heads != 0) throw std::invalid_argument("d_depth must be divisible by depth_heads");
  if (text_vocab <= kTextFirstWord) throw std::invalid_argument("text_vocab too small");
  if (audio_vocab <= kAudioFirstCode) throw std::invalid_argument("audio_vocab too small");
  if (delay_steps < 0) throw std::invalid_argument("delay_steps must be >= 0");
  if (depth_share_from < 0) throw std::invalid_argument("depth_share_from must be >= 0");
}

int ModelConfig::levels_per_stream_slots() const {
  return depth_share_from > 0 ? std::min(levels, depth_share_from) : levels;
}

int ModelConfig::DepthSlot(int position) const {
  if (position < 1 || position > depth_positions()) throw std::out_of_range("depth position out of range");
  const int stream = (position - 1) / levels;
  const int level = (position - 1) % levels + 1;
  const int per_stream = levels_per_stream_slots();
  return stream * per_stream + std::min(level, per_stream) - 1;
}

template <typename Scalar>
RqWeights<Scalar> RqWeights<Scalar>::Init(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const int d = config.d_model;
  const int dd = config.d_depth;
  RqWeights w;
  w.text_emb = RandomMatrix<Scalar>(rng, config.text_vocab, d, 1.0);
  for (int s = 0; s < 2 * config.levels; ++s) {
    w.audio_emb.push_back(RandomMatrix<Scalar>(rng, config.audio_vocab, d, 1.0));
  }
  w.label_emb = RandomMatrix<Scalar>(rng, kNumConditionLabels, d, 1.0);
  for (int l = 0; l < config.n_layers; ++l) {
    w.temporal.push_back(InitLayer<Scalar>(rng, d, config.ffn_dim, config.n_layers));
  }
  w.temporal_norm = Matrix<Scalar>::Ones(1, d);
  w.text_head = RandomMatrix<Scalar>(rng, d, config.text_vocab, 1.0 / std::sqrt(double(d)));
  w.depth_in = RandomMatrix<Scalar>(rng, d, dd, 1.0 / std::sqrt(double(d)));
  w.depth_text_emb = RandomMatrix<Scalar>(rng, config.text_vocab, dd, 1.0);
  for (int s = 0; s < config.num_depth_slots(); ++s) {
    w.depth_emb.push_back(RandomMatrix<Scalar>(rng, config.audio_vocab, dd, 1.0));
  }
  w.depth_pos = RandomMatrix<Scalar>(rng, config.depth_positions(), dd, 1.0);
  for (int l = 0; l < config.depth_layers; ++l) {
    w.depth.push_back(InitLayer<Scalar>(rng, dd, config.depth_ffn_dim, config.depth_layers));
  }
  w.depth_norm = Matrix<Scalar>::Ones(1, dd);
  for (int s = 0; s < config.num_depth_slots(); ++s) {
    w.depth_heads.push_back(RandomMatrix<Scalar>(rng, dd, config.audio_vocab, 1.0 / std::sqrt(double(dd))));
  }
  return w;
}

template <typename Scalar>
RqWeights<Scalar> RqWeights<Scalar>::ZerosLike(const RqWeights& other) {
  RqWeights out = other;
  out.ForEach([](const std::string&, Matrix<Scalar>& m) { m.setZero(); });
  return out;
}

template <typename Scalar>
std::size_t RqWeights<Scalar>::NumParameters() const {
  std::size_t n = 0;
  ForEach([&n](const std::string&, const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
BoundWeights<Scalar> Bind(ag::Graph<Scalar>& g, const RqWeights<Scalar>& w, RqWeights<Scalar>* grads) {
  auto sink = [grads](auto member) -> Matrix<Scalar>* {
    return grads != nullptr ? &(grads->*member) : nullptr;
  };
  using W = RqWeights<Scalar>;
  BoundWeights<Scalar> b;
  b.text_emb = g.Param(w.text_emb, sink(&W::text_emb));
  for (std::size_t i = 0; i < w.audio_emb.size(); ++i) {
    b.audio_emb.push_back(g.Param(w.audio_emb[i], grads ? &grads->audio_emb[i] : nullptr));
  }
  b.label_emb = g.Param(w.label_emb, sink(&W::label_emb));
  for (std::size_t i = 0; i < w.temporal.size(); ++i) {
    b.temporal.push_back(BindLayer(g, w.temporal[i], grads ? &grads->temporal[i] : nullptr));
  }
  b.temporal_norm = g.Param(w.temporal_norm, sink(&W::temporal_norm));
  b.text_head = g.Param(w.text_head, sink(&W::text_head));
  b.depth_in = g.Param(w.depth_in, sink(&W::depth_in));
  b.depth_text_emb = g.Param(w.depth_text_emb, sink(&W::depth_text_emb));
  for (std::size_t i = 0; i < w.depth_emb.size(); ++i) {
    b.depth_emb.push_back(g.Param(w.depth_emb[i], grads ? &grads->depth_emb[i] : nullptr));
  }
  b.depth_pos = g.Param(w.depth_pos, sink(&W::depth_pos));
  for (std::size_t i = 0; i < w.depth.size(); ++i) {
    b.depth.push_back(BindLayer(g, w.depth[i], grads ? &grads->depth[i] : nullptr));
  }
  b.depth_norm = g.Param(w.depth_norm, sink(&W::depth_norm));
  for (std::size_t i = 0; i < w.depth_heads.size(); ++i) {
    b.depth_heads.push_back(g.Param(w.depth_heads[i], grads ? &grads->depth_heads[i] : nullptr));
  }
  return b;
}

template <typename Scalar>
TeacherForcedLogits<Scalar> ForwardTeacherForced(ag::Graph<Scalar>& g, const BoundWeights<Scalar>& w,
                                                 const ModelConfig& config, const Multistream& inputs,
                                                 ConditionLabel label) {
  const int frames = inputs.frames();
  const int streams = 2 * config.levels;
  if (inputs.levels() != config.levels) throw std::invalid_argument("multistream level count mismatch");
  if (frames < 1) throw std::invalid_argument("empty sequence");
  if (frames > config.context_frames) throw std::invalid_argument("sequence longer than context");

  // Temporal input at position t is frame t - 1, BOS at t = 0.
  std::vector<int> text_ids(frames);
  std::vector<std::vector<int>> audio_ids(streams, std::vector<int>(frames));
  for (int t = 0; t < frames; ++t) {
    text_ids[t] = t == 0 ? kTextBos : inputs.text(t - 1);
    for (int s = 0; s < streams; ++s) audio_ids[s][t] = t == 0 ? kAudioBos : inputs.slot(t - 1, 1 + s);
  }
  std::vector<ag::Var> terms;
  terms.push_back(g.Gather(w.text_emb, text_ids));
  for (int s = 0; s < streams; ++s) terms.push_back(g.Gather(w.audio_emb[s], audio_ids[s]));
  terms.push_back(g.Gather(w.label_emb, std::vector<int>(frames, static_cast<int>(label))));
  ag::Var x = g.AddN(terms);

  ag::AttentionLayout temporal_layout;
  temporal_layout.segment.assign(frames, 0);
  temporal_layout.position.resize(frames);
  for (int t = 0; t < frames; ++t) temporal_layout.position[t] = t;
  temporal_layout.window = config.context_frames;
  for (const auto& layer : w.temporal) {
    x = GraphLayer(g, layer, config.n_heads, true, config.rope_base, temporal_layout, x);
  }
  ag::Var z = g.RmsNorm(x, w.temporal_norm);

  TeacherForcedLogits<Scalar> out;
  out.text = g.MatMul(z, w.text_head);

  // Depth rows are (t, p) at t * 2Q + p - 1.
  const int positions = config.depth_positions();
  const int rows = frames * positions;
  ag::Var z_proj = g.MatMul(z, w.depth_in);
  std::vector<int> frame_of_row(rows);
  std::vector<int> pos_of_row(rows);
  ag::AttentionLayout depth_layout;
  depth_layout.segment.resize(rows);
  depth_layout.position.resize(rows);
  for (int t = 0; t < frames; ++t) {
    for (int p = 1; p <= positions; ++p) {
      const int r = t * positions + p - 1;
      frame_of_row[r] = t;
      pos_of_row[r] = p - 1;
      depth_layout.segment[r] = t;
      depth_layout.position[r] = p - 1;
    }
  }
  std::vector<ag::Var> parts;
  std::vector<std::vector<int>> part_rows;
  for (int p = 1; p <= positions; ++p) {
    std::vector<int> ids(frames);
    std::vector<int> rows_p(frames);
    for (int t = 0; t < frames; ++t) {
      ids[t] = inputs.slot(t, p - 1);
      rows_p[t] = t * positions + p - 1;
    }
    const ag::Var table = p == 1 ? w.depth_text_emb : w.depth_emb[config.DepthSlot(p)];
    parts.push_back(g.Gather(table, std::move(ids)));
    part_rows.push_back(std::move(rows_p));
  }
  const std::vector<ag::Var> depth_terms = {g.Gather(z_proj, frame_of_row),
                                            g.Assemble(parts, part_rows, rows),
                                            g.Gather(w.depth_pos, pos_of_row)};
  ag::Var dx = g.AddN(depth_terms);
  for (const auto& layer : w.depth) {
    dx = GraphLayer(g, layer, config.depth_heads, false, config.rope_base, depth_layout, dx);
  }
  ag::Var dz = g.RmsNorm(dx, w.depth_norm);
  for (int p = 1; p <= positions; ++p) {
    std::vector<int> rows_p(frames);
    for (int t = 0; t < frames; ++t) rows_p[t] = t * positions + p - 1;
    out.audio.push_back(g.MatMul(g.Gather(dz, std::move(rows_p)), w.depth_heads[config.DepthSlot(p)]));
  }
  return out;
}

template <typename Scalar>
RqTransformer<Scalar>::RqTransformer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng(seed);
  weights_ = RqWeights<Scalar>::Init(config_, rng);
}

template <typename Scalar>
RqTransformer<Scalar>::RqTransformer(const ModelConfig& config, RqWeights<Scalar> weights)
    : config_(config), weights_(std::move(weights)) {
  config_.Validate();
}

template <typename Scalar>
TemporalCache<Scalar> RqTransformer<Scalar>::NewTemporalCache() const {
  TemporalCache<Scalar> cache;
  for (int l = 0; l < config_.n_layers; ++l) {
    cache.keys.emplace_back(config_.context_frames, config_.d_model);
    cache.values.emplace_back(config_.context_frames, config_.d_model);
  }
  return cache;
}

template <typename Scalar>
Matrix<Scalar> RqTransformer<Scalar>::TemporalStepBatch(std::span<const std::span<const Token>> prev_frames,
                                                        std::span<const ConditionLabel> labels,
                                                        std::span<TemporalCache<Scalar>* const> caches) const {
  const int batch = static_cast<int>(caches.size());
  if (static_cast<int>(prev_frames.size()) != batch || static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("batch size mismatch");
  }
  const int streams = 2 * config_.levels;
  const int d = config_.d_model;
  Matrix<Scalar> x(batch, d);
  std::vector<int> positions(batch), lo(batch);
  for (int b = 0; b < batch; ++b) {
    const int pos = caches[b]->length;
    if (pos >= config_.context_frames) throw std::length_error("prefix longer than context");
    positions[b] = pos;
    lo[b] = std::max(0, pos - config_.context_frames + 1);
    const auto& prev = prev_frames[b];
    const bool bos = prev.empty();
    if (!bos && static_cast<int>(prev.size()) != 1 + streams) throw std::invalid_argument("frame width mismatch");
    x.row(b) = weights_.text_emb.row(bos ? kTextBos : prev[0]);
    for (int s = 0; s < streams; ++s) x.row(b) += weights_.audio_emb[s].row(bos ? kAudioBos : prev[1 + s]);
    x.row(b) += weights_.label_emb.row(static_cast<int>(labels[b]));
  }
  for (int l = 0; l < config_.n_layers; ++l) {
    std::vector<Matrix<Scalar>*> keys(batch), values(batch);
    for (int b = 0; b < batch; ++b) {
      keys[b] = &caches[b]->keys[l];
      values[b] = &caches[b]->values[l];
    }
    LayerStep<Scalar>(weights_.temporal[l], config_.n_heads, true, config_.rope_base, positions, lo,
                      positions, keys, values, x);
  }
  for (int b = 0; b < batch; ++b) ++caches[b]->length;
  Matrix<Scalar> z;
  RmsNormRows(x, weights_.temporal_norm, z);
  return z;
}

template <typename Scalar>
RowVector<Scalar> RqTransformer<Scalar>::TemporalForward(const Multistream& prefix, ConditionLabel label,
                                                         TemporalCache<Scalar>& cache) const {
  if (prefix.levels() != config_.levels) throw std::invalid_argument("multistream level count mismatch");
  if (prefix.frames() >= config_.context_frames) throw std::length_error("prefix longer than context");
  if (cache.length > prefix.frames() + 1) throw std::invalid_argument("cache is ahead of the prefix");
  if (cache.keys.empty()) cache = NewTemporalCache();
  Matrix<Scalar> z;
  TemporalCache<Scalar>* caches[1] = {&cache};
  const ConditionLabel labels[1] = {label};
  // Position p consumes frame p - 1. The last needed position is prefix.frames().
  if (cache.length == prefix.frames() + 1) {
    throw std::invalid_argument("cache already holds the requested position");
  }
  while (cache.length <= prefix.frames()) {
    const int pos = cache.length;
    std::span<const Token> frame = pos == 0 ? std::span<const Token>() : prefix.row(pos - 1);
    const std::span<const Token> frames[1] = {frame};
    z = TemporalStepBatch(frames, labels, caches);
  }
  return z.row(0);
}

template <typename Scalar>
Matrix<Scalar> RqTransformer<Scalar>::TextLogitsBatch(const Matrix<Scalar>& z) const {
  Matrix<Scalar> logits;
  RowMatMul(z, weights_.text_head, logits);
  return logits;
}

template <typename Scalar>
DepthState<Scalar> RqTransformer<Scalar>::NewDepthState(const RowVector<Scalar>& z) const {
  DepthState<Scalar> state;
  Matrix<Scalar> zm = z;
  Matrix<Scalar> proj;
  RowMatMul(zm, weights_.depth_in, proj);
  state.z_proj = proj.row(0);
  for (int l = 0; l < config_.depth_layers; ++l) {
    state.keys.emplace_back(config_.depth_positions(), config_.d_depth);
    state.values.emplace_back(config_.depth_positions(), config_.d_depth);
  }
  return state;
}

template <typename Scalar>
Matrix<Scalar> RqTransformer<Scalar>::DepthStepBatch(std::span<const Token> prev_tokens,
                                                     std::span<DepthState<Scalar>* const> states) const {
  const int batch = static_cast<int>(states.size());
  if (static_cast<int>(prev_tokens.size()) != batch) throw std::invalid_argument("batch size mismatch");
  if (batch == 0) return {};
  const int p = states[0]->length + 1;
  if (p > config_.depth_positions()) throw std::out_of_range("depth position past 2Q");
  const int slot = config_.DepthSlot(p);
  const Matrix<Scalar>& table = p == 1 ? weights_.depth_text_emb : weights_.depth_emb[slot];
  Matrix<Scalar> x(batch, config_.d_depth);
  std::vector<int> positions(batch, p - 1), lo(batch, 0);
  for (int b = 0; b < batch; ++b) {
    if (states[b]->length + 1 != p) throw std::invalid_argument("depth states out of step");
    if (prev_tokens[b] >= table.rows()) throw std::out_of_range("depth input token out of range");
    x.row(b) = states[b]->z_proj;
    x.row(b) += table.row(prev_tokens[b]);
    x.row(b) += weights_.depth_pos.row(p - 1);
  }
  for (int l = 0; l < config_.depth_layers; ++l) {
    std::vector<Matrix<Scalar>*> keys(batch), values(batch);
    for (int b = 0; b < batch; ++b) {
      keys[b] = &states[b]->keys[l];
      values[b] = &states[b]->values[l];
    }
    LayerStep<Scalar>(weights_.depth[l], config_.depth_heads, false, config_.rope_base, positions, lo,
                      positions, keys, values, x);
  }
  for (int b = 0; b < batch; ++b) ++states[b]->length;
  Matrix<Scalar> h, logits;
  RmsNormRows(x, weights_.depth_norm, h);
  RowMatMul(h, weights_.depth_heads[slot], logits);
  return logits;
}

template <typename Scalar>
RowVector<Scalar> RqTransformer<Scalar>::DepthForward(const RowVector<Scalar>& z,
                                                      std::span<const Token> tokens_so_far) const {
  const int position = static_cast<int>(tokens_so_far.size());
  if (position > config_.depth_positions()) {
    throw std::out_of_range("depth position " + std::to_string(position) + " > 2Q");
  }
  if (position == 0) return TextLogitsBatch(Matrix<Scalar>(z)).row(0);
  DepthState<Scalar> state = NewDepthState(z);
  DepthState<Scalar>* states[1] = {&state};
  Matrix<Scalar> logits;
  for (int k = 0; k < position; ++k) {
    const Token prev[1] = {tokens_so_far[k]};
    logits = DepthStepBatch(prev, states);
  }
  return logits.row(0);
}

template struct RqWeights<float>;
template struct RqWeights<double>;
template class RqTransformer<float>;
template class RqTransformer<double>;
template BoundWeights<float> Bind(ag::Graph<float>&, const RqWeights<float>&, RqWeights<float>*);
template BoundWeights<double> Bind(ag::Graph<double>&, const RqWeights<double>&, RqWeights<double>*);
template TeacherForcedLogits<float> ForwardTeacherForced(ag::Graph<float>&, const BoundWeights<float>&,
                                                         const ModelConfig&, const Multistream&, ConditionLabel);
template TeacherForcedLogits<double> ForwardTeacherForced(ag::Graph<double>&, const BoundWeights<double>&,
                                                          const ModelConfig&, const Multistream&, ConditionLabel);

namespace {

nlohmann::json ConfigToJson(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"ffn_dim", c.ffn_dim},
          {"context_frames", c.context_frames},
          {"d_depth", c.d_depth},
          {"depth_layers", c.depth_layers},
          {"depth_heads", c.depth_heads},
          {"depth_ffn_dim", c.depth_ffn_dim},
          {"levels", c.levels},
          {"text_vocab", c.text_vocab},
          {"audio_vocab", c.audio_vocab},
          {"delay_steps", c.delay_steps},
          {"depth_share_from", c.depth_share_from},
          {"rope_base", c.rope_base}};
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.ffn_dim = j.at("ffn_dim");
  c.context_frames = j.at("context_frames");
  c.d_depth = j.at("d_depth");
  c.depth_layers = j.at("depth_layers");
  c.depth_heads = j.at("depth_heads");
  c.depth_ffn_dim = j.at("depth_ffn_dim");
  c.levels = j.at("levels");
  c.text_vocab = j.at("text_vocab");
  c.audio_vocab = j.at("audio_vocab");
  c.delay_steps = j.at("delay_steps");
  c.depth_share_from = j.at("depth_share_from");
  c.rope_base = j.at("rope_base");
  return c;
}

}  // namespace

void WriteCheckpoint(std::ostream& os, const ModelConfig& config, const RqWeights<float>& weights,
                     const std::string& metadata_json) {
  io::WriteMagic(os, "RQT1");
  io::WriteString(os, ConfigToJson(config).dump());
  io::WriteString(os, metadata_json);
  std::uint32_t count = 0;
  weights.ForEach([&count](const std::string&, const MatrixF&) { ++count; });
  io::Write<std::uint32_t>(os, count);
  weights.ForEach([&os](const std::string& name, const MatrixF& m) {
    io::WriteString(os, name);
    io::Write<std::uint32_t>(os, 2);
    io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
    io::Write<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) io::Write<float>(os, m.data()[i]);
  });
}

Checkpoint ReadCheckpoint(std::istream& is) {
  io::ExpectMagic(is, "RQT1");
  Checkpoint ck;
  try {
    ck.config = ConfigFromJson(nlohmann::json::parse(io::ReadString(is)));
    ck.config.Validate();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad checkpoint config: ") + e.what());
  }
  ck.metadata_json = io::ReadString(is);
  const auto count = io::Read<std::uint32_t>(is);
  std::map<std::string, MatrixF> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = io::ReadString(is, 4096);
    const auto rank = io::Read<std::uint32_t>(is);
    if (rank != 2) throw DataError("tensor " + name + " has unsupported rank");
    const auto rows = io::Read<std::uint32_t>(is);
    const auto cols = io::Read<std::uint32_t>(is);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw DataError("tensor too large");
    MatrixF m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = io::Read<float>(is);
    tensors.emplace(std::move(name), std::move(m));
  }
  Rng rng(0);
  ck.weights = RqWeights<float>::Init(ck.config, rng);
  ck.weights.ForEach([&tensors](const std::string& name, MatrixF& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint is missing tensor " + name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw DataError("checkpoint tensor " + name + " has the wrong shape");
    }
    m = std::move(it->second);
    tensors.erase(it);
  });
  if (!tensors.empty()) throw DataError("checkpoint has unexpected tensor " + tensors.begin()->first);
  return ck;
}

void SaveCheckpoint(const std::string& path, const ModelConfig& config, const RqWeights<float>& weights,
                    const std::string& metadata_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  WriteCheckpoint(os, config, weights, metadata_json);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  return ReadCheckpoint(is);
}

}  // namespace simtrans
