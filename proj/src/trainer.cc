#include "simtrans/trainer.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace simtrans {

bool IsMaskedAudioTarget(int frame, int level, int delay_steps) {
  return level >= 1 && frame < delay_steps;
}

template <typename Scalar>
ag::Var BuildLoss(ag::Graph<Scalar>& g, const BoundWeights<Scalar>& w, const ModelConfig& config,
                  const TrainingExample& ex, const LossWeights& lw, StreamLosses* losses) {
  if (ex.inputs.frames() != ex.targets.frames() || ex.inputs.levels() != ex.targets.levels()) {
    throw std::invalid_argument("inputs and targets differ in shape");
  }
  const int frames = ex.inputs.frames();
  const int levels = config.levels;
  const auto logits = ForwardTeacherForced(g, w, config, ex.inputs, ex.label);

  std::vector<int> text_targets(frames);
  for (int t = 0; t < frames; ++t) text_targets[t] = ex.targets.text(t);
  const ag::Var text_sum = g.CrossEntropySum(logits.text, std::move(text_targets));

  std::vector<ag::Var> out_terms, in_terms;
  int out_count = 0;
  int in_count = 0;
  for (int p = 1; p <= 2 * levels; ++p) {
    const int level = (p - 1) % levels;
    const bool output_stream = p <= levels;
    std::vector<int> targets(frames);
    for (int t = 0; t < frames; ++t) {
      if (IsMaskedAudioTarget(t, level, config.delay_steps)) {
        targets[t] = -1;
      } else {
        targets[t] = ex.targets.slot(t, p);
        (output_stream ? out_count : in_count) += 1;
      }
    }
    (output_stream ? out_terms : in_terms).push_back(g.CrossEntropySum(logits.audio[p - 1], std::move(targets)));
  }
  const ag::Var out_sum = g.AddN(out_terms);
  const ag::Var in_sum = g.AddN(in_terms);
  const Scalar text_scale = Scalar(1) / Scalar(frames);
  const Scalar out_scale = out_count > 0 ? Scalar(1) / Scalar(out_count) : Scalar(0);
  const Scalar in_scale = in_count > 0 ? Scalar(1) / Scalar(in_count) : Scalar(0);
  if (losses != nullptr) {
    losses->text = static_cast<double>(g.scalar(text_sum) * text_scale);
    losses->audio_out = static_cast<double>(g.scalar(out_sum) * out_scale);
    losses->audio_in = static_cast<double>(g.scalar(in_sum) * in_scale);
    losses->total = lw.text * losses->text + lw.audio_out * losses->audio_out + lw.audio_in * losses->audio_in;
  }
  const std::vector<ag::Var> terms = {g.Scale(text_sum, static_cast<Scalar>(lw.text) * text_scale),
                                      g.Scale(out_sum, static_cast<Scalar>(lw.audio_out) * out_scale),
                                      g.Scale(in_sum, static_cast<Scalar>(lw.audio_in) * in_scale)};
  return g.AddN(terms);
}

template <typename Scalar>
StreamLosses LossAndGradient(const ModelConfig& config, const RqWeights<Scalar>& weights,
                             std::span<const TrainingExample> batch, const LossWeights& lw,
                             RqWeights<Scalar>* grads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (grads != nullptr) *grads = RqWeights<Scalar>::ZerosLike(weights);
  StreamLosses mean;
  const Scalar inv = Scalar(1) / Scalar(batch.size());
  for (const auto& ex : batch) {
    ag::Graph<Scalar> g;
    const auto bound = Bind(g, weights, grads);
    StreamLosses l;
    const ag::Var loss = BuildLoss(g, bound, config, ex, lw, &l);
    if (grads != nullptr) g.Backward(g.Scale(loss, inv));
    mean.text += l.text / batch.size();
    mean.audio_out += l.audio_out / batch.size();
    mean.audio_in += l.audio_in / batch.size();
    mean.total += l.total / batch.size();
  }
  return mean;
}

AdamW::AdamW(const RqWeights<float>& like, OptimizerConfig config)
    : config_(config), m_(RqWeights<float>::ZerosLike(like)), v_(RqWeights<float>::ZerosLike(like)) {}

void AdamW::Step(RqWeights<float>& weights, RqWeights<float>& grads) {
  ++step_;
  double scale = 1.0;
  if (config_.grad_clip > 0) {
    double sq = 0;
    grads.ForEach([&sq](const std::string&, const MatrixF& g) { sq += g.cast<double>().squaredNorm(); });
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) scale = config_.grad_clip / norm;
  }
  double lr = config_.learning_rate;
  if (config_.warmup_steps > 0 && step_ <= config_.warmup_steps) {
    lr *= double(step_) / config_.warmup_steps;
  } else if (config_.decay_steps > 0) {
    const double progress = std::min(1.0, double(step_ - config_.warmup_steps) / config_.decay_steps);
    const double f = config_.min_lr_fraction + (1 - config_.min_lr_fraction) * 0.5 * (1 + std::cos(M_PI * progress));
    lr *= f;
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);

  std::vector<MatrixF*> w, g, m, v;
  weights.ForEach([&w](const std::string&, MatrixF& x) { w.push_back(&x); });
  grads.ForEach([&g](const std::string&, MatrixF& x) { g.push_back(&x); });
  m_.ForEach([&m](const std::string&, MatrixF& x) { m.push_back(&x); });
  v_.ForEach([&v](const std::string&, MatrixF& x) { v.push_back(&x); });
  const float b1 = static_cast<float>(config_.beta1);
  const float b2 = static_cast<float>(config_.beta2);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const MatrixF grad = *g[k] * static_cast<float>(scale);
    *m[k] = b1 * *m[k] + (1 - b1) * grad;
    *v[k] = b2 * *v[k] + (1 - b2) * grad.cwiseProduct(grad);
    const bool decay = w[k]->rows() > 1;
    if (decay) *w[k] *= static_cast<float>(1.0 - lr * config_.weight_decay);
    const auto mhat = m[k]->array() / static_cast<float>(bc1);
    const auto vhat = v[k]->array() / static_cast<float>(bc2);
    w[k]->array() -= static_cast<float>(lr) * mhat / (vhat.sqrt() + static_cast<float>(config_.eps));
  }
}

Trainer::Trainer(const ModelConfig& model, OptimizerConfig optimizer, LossWeights loss_weights,
                 std::uint64_t seed)
    : Trainer(model, RqTransformer<float>(model, seed).weights(), optimizer, loss_weights) {}

Trainer::Trainer(const ModelConfig& model, RqWeights<float> weights, OptimizerConfig optimizer,
                 LossWeights loss_weights)
    : config_(model), loss_weights_(loss_weights), weights_(std::move(weights)), optimizer_(weights_, optimizer) {
  config_.Validate();
}

StreamLosses Trainer::TrainStep(std::span<const TrainingExample> batch) {
  RqWeights<float> grads;
  const StreamLosses l = LossAndGradient(config_, weights_, batch, loss_weights_, &grads);
  if (!std::isfinite(l.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << optimizer_.steps() + 1 << ": text=" << l.text
        << " audio_out=" << l.audio_out << " audio_in=" << l.audio_in;
    bool weights_finite = true;
    weights_.ForEach([&weights_finite](const std::string&, const MatrixF& m) {
      weights_finite = weights_finite && m.allFinite();
    });
    msg << (weights_finite ? " (weights finite)" : " (weights already non-finite)");
    throw std::runtime_error(msg.str());
  }
  optimizer_.Step(weights_, grads);
  return l;
}

StreamLosses Trainer::Evaluate(std::span<const TrainingExample> batch) const {
  return LossAndGradient<float>(config_, weights_, batch, loss_weights_, nullptr);
}

template ag::Var BuildLoss(ag::Graph<float>&, const BoundWeights<float>&, const ModelConfig&,
                           const TrainingExample&, const LossWeights&, StreamLosses*);
template ag::Var BuildLoss(ag::Graph<double>&, const BoundWeights<double>&, const ModelConfig&,
                           const TrainingExample&, const LossWeights&, StreamLosses*);
template StreamLosses LossAndGradient(const ModelConfig&, const RqWeights<float>&,
                                      std::span<const TrainingExample>, const LossWeights&, RqWeights<float>*);
template StreamLosses LossAndGradient(const ModelConfig&, const RqWeights<double>&,
                                      std::span<const TrainingExample>, const LossWeights&, RqWeights<double>*);

}  // namespace simtrans
