#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "simtrans/alignment.h"
#include "simtrans/tensor.h"

namespace simtrans {

struct TimedWord {
  std::string text;
  double start = 0;
  double end = 0;

  double duration() const { return end - start; }
  bool operator==(const TimedWord&) const = default;
};

struct TimedTranscript {
  std::vector<TimedWord> words;

  int size() const { return static_cast<int>(words.size()); }
  // 0 <= start < end and non-decreasing starts; throws DataError otherwise.
  void Validate() const;
  std::vector<std::string> texts() const;
  bool operator==(const TimedTranscript&) const = default;
};

// One {"text", "start", "end"} object per line.
void WriteTranscriptJsonl(std::ostream& os, const TimedTranscript& transcript);
TimedTranscript ReadTranscriptJsonl(std::istream& is);
void SaveTranscript(const std::string& path, const TimedTranscript& transcript);
TimedTranscript LoadTranscript(const std::string& path);

// target.start(j) - source.end(a_j) per target word, seconds.
std::vector<double> ComputeLags(const TimedTranscript& source, const TimedTranscript& target,
                                const AlignmentMap& a);

struct SpikeOptions {
  int window = 5;
  double threshold = 0.25;
};

// Caps each source end time at (1 + threshold) times the mean of its centered
// window neighbours (excluding itself); an over-cap a_j moves to the largest
// source index whose end fits. Updates are applied in place, left to right,
// until a full pass changes nothing.
AlignmentMap SmoothSpikes(const AlignmentMap& a, const TimedTranscript& source, SpikeOptions options = {});

// The cap of position j under `a`, or +inf when the window has no neighbours.
double SpikeCap(const AlignmentMap& a, const TimedTranscript& source, int j, SpikeOptions options = {});

// Delays target words so each starts at least min_lag_s after the end of its
// aligned source word. Durations and order are kept; later words move with
// the accumulated shift.
TimedTranscript InsertSilences(const TimedTranscript& target, const TimedTranscript& source,
                               const AlignmentMap& a, double min_lag_s = 2.0);

struct PaddingPenalty {
  double bias = 0;
  bool force_pad = false;
};

// Bias for the padding logit given how far the pending word lags its aligned
// source word: 0 up to 1 s, linear to -2 at 2 s and beyond. A negative lag
// means the word would precede its source and padding is forced.
PaddingPenalty PaddingPenaltyForLag(double lag_s);

// Applies a penalty to a row of text logits in place.
template <typename Scalar>
void ApplyPaddingPenalty(const PaddingPenalty& penalty, int pad_id, RowVector<Scalar>& logits) {
  if (penalty.force_pad) {
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
      if (k != pad_id) logits[k] = -std::numeric_limits<Scalar>::infinity();
    }
    return;
  }
  logits[pad_id] += static_cast<Scalar>(penalty.bias);
}

struct LagSummary {
  double mean = 0;
  double min = 0;
  double max = 0;
  int violations = 0;  // lags below the minimum
};
LagSummary SummarizeLags(std::span<const double> lags, double min_lag_s);

}  // namespace simtrans
