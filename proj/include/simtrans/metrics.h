#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simtrans/labels.h"

namespace simtrans {

// Lowercase, drop ASCII punctuation, collapse whitespace.
std::string NormalizeText(std::string_view text);
// Whitespace split of the normalized text.
std::vector<std::string> TokenizeForBleu(std::string_view text);

inline constexpr int kBleuMaxOrder = 4;

struct BleuStats {
  std::array<double, kBleuMaxOrder> matches{};
  std::array<double, kBleuMaxOrder> totals{};
  double hyp_len = 0;
  double ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

// Clipped n-gram matches of one pair, orders 1..4.
BleuStats ComputeBleuStats(std::span<const std::string> hyp, std::span<const std::string> ref);

// 100 * BP * exp(mean log p_n) with no smoothing: any zero precision gives 0.
// BP = exp(1 - r/c) when c < r. With effective_order, orders whose n-gram
// total is zero are left out of the mean.
double BleuFromStats(const BleuStats& stats, bool effective_order = false);

// Sentence-level BLEU on raw strings (normalized first), effective order on.
double SentenceBleu(std::string_view hyp, std::string_view ref);
// Corpus BLEU from summed statistics.
double CorpusBleu(std::span<const std::string> hyps, std::span<const std::string> refs);

struct LatencyInputs {
  std::vector<double> emit_times;  // d_i, seconds, non-decreasing
  double source_duration = 0;      // seconds
  int n_ref = 1;
};

// Length-adaptive average lagging. Throws std::invalid_argument for empty or
// decreasing emission times, a non-positive source duration or n_ref < 1.
double Laal(const LatencyInputs& in);

// Output end minus source end, seconds.
double EndOffset(double source_last_word_end_s, double output_last_word_end_s);

// Throws std::invalid_argument on size mismatch or a zero vector.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// Quintile labels within one dataset. Boundaries are nearest-rank 20/40/60/80
// percentiles and a score belongs to the first bucket whose boundary it does
// not exceed. All-equal scores are labeled neutral. Needs at least 5 scores.
std::vector<ConditionLabel> QuantileLabels(std::span<const double> scores);
// Each dataset is labeled against its own boundaries.
std::vector<std::vector<ConditionLabel>> QuantileLabelsPerDataset(
    std::span<const std::vector<double>> datasets);

}  // namespace simtrans
