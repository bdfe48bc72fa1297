#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simtrans/autograd.h"
#include "simtrans/model.h"

namespace simtrans {

struct LossWeights {
  double text = 1.0;
  double audio_out = 1.0;
  double audio_in = 1.0;
};

struct OptimizerConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.1;
  double eps = 1e-8;
  int warmup_steps = 20;
  // Cosine decay to min_lr_fraction over decay_steps after warmup; 0 keeps
  // the rate constant.
  int decay_steps = 0;
  double min_lr_fraction = 0.1;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

struct StreamLosses {
  double text = 0;       // mean per-token cross-entropy
  double audio_out = 0;
  double audio_in = 0;
  double total = 0;      // weighted sum
};

// Audio targets that carry no information: acoustic levels inside the first
// delay_steps frames. Returned as -1 in the per-position target lists.
bool IsMaskedAudioTarget(int frame, int level, int delay_steps);

// Builds the weighted mean cross-entropy of one example into `graph`.
// Returns the scalar loss node and fills the per-stream means.
template <typename Scalar>
ag::Var BuildLoss(ag::Graph<Scalar>& graph, const BoundWeights<Scalar>& weights,
                  const ModelConfig& config, const TrainingExample& example,
                  const LossWeights& loss_weights, StreamLosses* losses);

// Loss and gradient of the batch mean, without touching the weights.
template <typename Scalar>
StreamLosses LossAndGradient(const ModelConfig& config, const RqWeights<Scalar>& weights,
                             std::span<const TrainingExample> batch, const LossWeights& loss_weights,
                             RqWeights<Scalar>* grads);

// Decoupled weight decay Adam; decay applies to matrices with more than one row.
class AdamW {
 public:
  AdamW(const RqWeights<float>& like, OptimizerConfig config);
  void Step(RqWeights<float>& weights, RqWeights<float>& grads);
  int steps() const { return step_; }

 private:
  OptimizerConfig config_;
  RqWeights<float> m_, v_;
  int step_ = 0;
};

class Trainer {
 public:
  Trainer(const ModelConfig& model, OptimizerConfig optimizer, LossWeights loss_weights,
          std::uint64_t seed);
  Trainer(const ModelConfig& model, RqWeights<float> weights, OptimizerConfig optimizer,
          LossWeights loss_weights);

  // One optimizer update on the batch mean. Throws std::runtime_error with
  // per-stream diagnostics when the loss is not finite.
  StreamLosses TrainStep(std::span<const TrainingExample> batch);
  StreamLosses Evaluate(std::span<const TrainingExample> batch) const;

  const ModelConfig& config() const { return config_; }
  const RqWeights<float>& weights() const { return weights_; }
  int steps() const { return optimizer_.steps(); }

 private:
  ModelConfig config_;
  LossWeights loss_weights_;
  RqWeights<float> weights_;
  AdamW optimizer_;
};

}  // namespace simtrans
