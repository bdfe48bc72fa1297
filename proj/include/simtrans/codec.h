#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtrans/rng.h"
#include "simtrans/tensor.h"

namespace simtrans {

struct CodecConfig {
  double frame_rate_hz = 12.5;
  double sample_rate_hz = 24000.0;
  int latent_dim = 16;
  int num_levels = 8;
  int codebook_size = 64;
  std::uint64_t featurizer_seed = 1234;

  // Throws std::invalid_argument when the config is unusable.
  void Validate() const;
  int SamplesPerFrame() const;
  // T = floor(f_r * duration).
  int FramesFor(std::size_t num_samples) const;
};

// T x Q table of tokens. Row t holds the Q levels of frame t.
struct TokenGrid {
  int frames = 0;
  int levels = 0;
  double frame_rate_hz = 12.5;
  std::vector<Token> tokens;

  TokenGrid() = default;
  TokenGrid(int frames, int levels, Token fill = 0, double frame_rate_hz = 12.5);

  Token& at(int t, int q) { return tokens[static_cast<std::size_t>(t) * levels + q]; }
  Token at(int t, int q) const { return tokens[static_cast<std::size_t>(t) * levels + q]; }
  std::span<const Token> frame(int t) const {
    return {tokens.data() + static_cast<std::size_t>(t) * levels, static_cast<std::size_t>(levels)};
  }

  bool operator==(const TokenGrid& other) const {
    return frames == other.frames && levels == other.levels && tokens == other.tokens;
  }
};

// TGR1: magic, u32 T, u32 Q, then u16 tokens row-major.
void WriteTokenGrid(std::ostream& os, const TokenGrid& grid);
TokenGrid ReadTokenGrid(std::istream& is);
void SaveTokenGrid(const std::string& path, const TokenGrid& grid);
TokenGrid LoadTokenGrid(const std::string& path);

// Fixed seeded linear map from a windowed block of samples to one latent frame.
template <typename Scalar>
class Featurizer {
 public:
  explicit Featurizer(const CodecConfig& config) : config_(config) {
    config_.Validate();
    const int spf = config_.SamplesPerFrame();
    projection_.resize(spf, config_.latent_dim);
    Rng rng(config_.featurizer_seed);
    const double scale = std::sqrt(3.0 / spf);
    for (int n = 0; n < spf; ++n) {
      const double window = 0.5 - 0.5 * std::cos(2.0 * M_PI * (n + 0.5) / spf);
      for (int c = 0; c < config_.latent_dim; ++c) {
        projection_(n, c) = static_cast<Scalar>(window * scale * rng.Uniform(-1.0, 1.0));
      }
    }
  }

  Matrix<Scalar> operator()(std::span<const Scalar> signal) const {
    const int spf = config_.SamplesPerFrame();
    if (signal.size() < static_cast<std::size_t>(spf)) {
      throw std::invalid_argument("signal too short");
    }
    const int frames = static_cast<int>(signal.size() / spf);
    Eigen::Map<const Matrix<Scalar>> blocks(signal.data(), frames, spf);
    return blocks * projection_;
  }

  const Matrix<Scalar>& projection() const { return projection_; }

 private:
  CodecConfig config_;
  Matrix<Scalar> projection_;
};

template <typename Scalar>
Matrix<Scalar> Featurize(std::span<const Scalar> signal, const CodecConfig& config) {
  return Featurizer<Scalar>(config)(signal);
}

// Per-level codebooks plus EMA statistics used by training.
template <typename Scalar>
struct CodebookStack {
  std::vector<Matrix<Scalar>> entries;    // level -> codebook_size x latent_dim
  std::vector<Vector<Scalar>> ema_counts;  // level -> codebook_size
  std::vector<Matrix<Scalar>> ema_sums;   // level -> codebook_size x latent_dim

  int num_levels() const { return static_cast<int>(entries.size()); }
  int codebook_size() const { return entries.empty() ? 0 : static_cast<int>(entries[0].rows()); }
  int latent_dim() const { return entries.empty() ? 0 : static_cast<int>(entries[0].cols()); }

  // Wraps fixed entries; EMA counts start at 1 so that sums equal entries.
  static CodebookStack FromEntries(std::vector<Matrix<Scalar>> levels) {
    CodebookStack stack;
    for (auto& level : levels) {
      stack.ema_counts.push_back(Vector<Scalar>::Ones(level.rows()));
      stack.ema_sums.push_back(level);
      stack.entries.push_back(std::move(level));
    }
    return stack;
  }

  bool AllFinite() const {
    for (const auto& level : entries) {
      if (!level.allFinite()) return false;
    }
    return true;
  }
};

// Index of the nearest codebook row to x; the lowest index wins ties.
template <typename Scalar, typename Derived>
int NearestEntry(const Matrix<Scalar>& codebook, const Eigen::MatrixBase<Derived>& x) {
  int best = 0;
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    const Scalar dist = (codebook.row(k) - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// Residual quantization with the first `levels` codebooks (all when < 0).
template <typename Scalar>
TokenGrid RvqEncode(const Matrix<Scalar>& latents, const CodebookStack<Scalar>& codebooks,
                    int levels = -1, double frame_rate_hz = 12.5) {
  if (latents.cols() != codebooks.latent_dim()) {
    throw std::invalid_argument("latent dimension mismatch: got " +
                                std::to_string(latents.cols()) + ", codebooks have " +
                                std::to_string(codebooks.latent_dim()));
  }
  if (levels < 0) levels = codebooks.num_levels();
  if (levels > codebooks.num_levels()) throw std::invalid_argument("too many levels requested");
  TokenGrid grid(static_cast<int>(latents.rows()), levels, 0, frame_rate_hz);
  RowVector<Scalar> residual;
  for (Eigen::Index t = 0; t < latents.rows(); ++t) {
    residual = latents.row(t);
    for (int q = 0; q < levels; ++q) {
      const int k = NearestEntry(codebooks.entries[q], residual);
      grid.at(static_cast<int>(t), q) = static_cast<Token>(k);
      residual -= codebooks.entries[q].row(k);
    }
  }
  return grid;
}

template <typename Scalar>
Matrix<Scalar> RvqDecode(const TokenGrid& grid, const CodebookStack<Scalar>& codebooks) {
  if (grid.levels > codebooks.num_levels()) {
    throw std::invalid_argument("grid has more levels than the codebooks");
  }
  Matrix<Scalar> out = Matrix<Scalar>::Zero(grid.frames, codebooks.latent_dim());
  for (int t = 0; t < grid.frames; ++t) {
    for (int q = 0; q < grid.levels; ++q) {
      const int k = grid.at(t, q);
      if (k >= codebooks.codebook_size()) {
        throw std::out_of_range("token " + std::to_string(k) + " out of range at frame " +
                                std::to_string(t) + " level " + std::to_string(q));
      }
      out.row(t) += codebooks.entries[q].row(k);
    }
  }
  return out;
}

template <typename Scalar>
double ReconstructionMse(const Matrix<Scalar>& latents, const CodebookStack<Scalar>& codebooks,
                         int levels = -1) {
  const Matrix<Scalar> recon = RvqDecode(RvqEncode(latents, codebooks, levels), codebooks);
  return static_cast<double>((latents - recon).squaredNorm()) /
         static_cast<double>(latents.rows());
}

// Random Gaussian entries, used as the untrained baseline.
template <typename Scalar>
CodebookStack<Scalar> InitCodebooksRandom(const CodecConfig& config, Rng& rng,
                                          double scale = 1.0) {
  std::vector<Matrix<Scalar>> levels;
  for (int q = 0; q < config.num_levels; ++q) {
    Matrix<Scalar> level(config.codebook_size, config.latent_dim);
    for (Eigen::Index i = 0; i < level.size(); ++i) {
      level.data()[i] = static_cast<Scalar>(scale * rng.Normal());
    }
    levels.push_back(std::move(level));
  }
  return CodebookStack<Scalar>::FromEntries(std::move(levels));
}

// k-means++ seeding per level on the residuals left by the previous levels.
template <typename Scalar>
CodebookStack<Scalar> InitCodebooksKMeansPlusPlus(const Matrix<Scalar>& batch,
                                                  const CodecConfig& config, Rng& rng) {
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  if (batch.cols() != config.latent_dim) throw std::invalid_argument("latent dimension mismatch");
  const Eigen::Index n = batch.rows();
  Matrix<Scalar> residual = batch;
  std::vector<Matrix<Scalar>> levels;
  for (int q = 0; q < config.num_levels; ++q) {
    Matrix<Scalar> level(config.codebook_size, config.latent_dim);
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    Eigen::Index pick = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(n)));
    for (int k = 0; k < config.codebook_size; ++k) {
      level.row(k) = residual.row(pick);
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = static_cast<double>((residual.row(i) - level.row(k)).squaredNorm());
        d2[i] = std::min(d2[i], d);
        total += d2[i];
      }
      if (total <= 0.0) {
        pick = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(n)));
        continue;
      }
      double u = rng.Uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      residual.row(i) -= level.row(NearestEntry(level, residual.row(i)));
    }
    levels.push_back(std::move(level));
  }
  return CodebookStack<Scalar>::FromEntries(std::move(levels));
}

struct CodebookTrainStats {
  double quantization_error = 0.0;  // mean squared error of the full reconstruction
  double commitment_loss = 0.0;     // commitment_weight * mean squared input-to-quantized distance
  int revived_entries = 0;
};

inline constexpr double kDeadEntryThreshold = 1e-3;

// One EMA update. Assignments use the codebooks as they were on entry; every
// level is then re-estimated as ema_sum / ema_count.
template <typename Scalar>
CodebookTrainStats CodebookTrainStep(const Matrix<Scalar>& batch, CodebookStack<Scalar>& codebooks,
                                     double ema_decay, double commitment_weight, Rng& rng) {
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  if (batch.cols() != codebooks.latent_dim()) throw std::invalid_argument("latent dimension mismatch");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw std::invalid_argument("ema_decay must be in (0,1)");

  const Eigen::Index n = batch.rows();
  const int levels = codebooks.num_levels();
  Matrix<Scalar> residual = batch;
  Matrix<Scalar> quantized = Matrix<Scalar>::Zero(n, batch.cols());
  std::vector<Matrix<Scalar>> level_inputs;
  std::vector<std::vector<int>> assignments(levels, std::vector<int>(static_cast<std::size_t>(n)));
  for (int q = 0; q < levels; ++q) {
    level_inputs.push_back(residual);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = NearestEntry(codebooks.entries[q], residual.row(i));
      assignments[q][i] = k;
      quantized.row(i) += codebooks.entries[q].row(k);
      residual.row(i) -= codebooks.entries[q].row(k);
    }
  }

  CodebookTrainStats stats;
  const double mse = static_cast<double>((batch - quantized).squaredNorm()) /
                     static_cast<double>(n * batch.cols());
  stats.quantization_error = static_cast<double>((batch - quantized).squaredNorm()) /
                             static_cast<double>(n);
  stats.commitment_loss = commitment_weight * mse;

  const Scalar decay = static_cast<Scalar>(ema_decay);
  const Scalar keep = static_cast<Scalar>(1.0 - ema_decay);
  for (int q = 0; q < levels; ++q) {
    const int size = codebooks.codebook_size();
    Vector<Scalar> counts = Vector<Scalar>::Zero(size);
    Matrix<Scalar> sums = Matrix<Scalar>::Zero(size, batch.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      counts(assignments[q][i]) += Scalar(1);
      sums.row(assignments[q][i]) += level_inputs[q].row(i);
    }
    codebooks.ema_counts[q] = decay * codebooks.ema_counts[q] + keep * counts;
    codebooks.ema_sums[q] = decay * codebooks.ema_sums[q] + keep * sums;
    for (int k = 0; k < size; ++k) {
      if (codebooks.ema_counts[q](k) < static_cast<Scalar>(kDeadEntryThreshold)) {
        const auto pick = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(n)));
        codebooks.entries[q].row(k) = level_inputs[q].row(pick);
        codebooks.ema_counts[q](k) = Scalar(1);
        codebooks.ema_sums[q].row(k) = codebooks.entries[q].row(k);
        ++stats.revived_entries;
      } else {
        codebooks.entries[q].row(k) = codebooks.ema_sums[q].row(k) / codebooks.ema_counts[q](k);
      }
    }
  }
  return stats;
}

// RVQ1: magic, u32 latent_dim, num_levels, codebook_size, sample_rate_hz,
// frame_rate_millihz, then f32 entries level-major, row-major within a level.
void WriteCodebooks(std::ostream& os, const CodebookStack<float>& codebooks,
                    const CodecConfig& config);
CodebookStack<float> ReadCodebooks(std::istream& is, CodecConfig* config = nullptr);
void SaveCodebooks(const std::string& path, const CodebookStack<float>& codebooks,
                   const CodecConfig& config);
CodebookStack<float> LoadCodebooks(const std::string& path, CodecConfig* config = nullptr);

}  // namespace simtrans
