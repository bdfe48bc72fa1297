#include "simtrans/timing.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "simtrans/errors.h"

namespace simtrans {

void TimedTranscript::Validate() const {
  for (int j = 0; j < size(); ++j) {
    const auto& w = words[j];
    if (!(w.start >= 0) || !(w.end > w.start)) {
      throw DataError("word " + std::to_string(j + 1) + " ('" + w.text + "') has invalid times");
    }
    if (j > 0 && w.start < words[j - 1].start) {
      throw DataError("word " + std::to_string(j + 1) + " starts before the previous word");
    }
  }
}

std::vector<std::string> TimedTranscript::texts() const {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.text);
  return out;
}

void WriteTranscriptJsonl(std::ostream& os, const TimedTranscript& transcript) {
  for (const auto& w : transcript.words) {
    os << nlohmann::json{{"text", w.text}, {"start", w.start}, {"end", w.end}}.dump() << '\n';
  }
}

TimedTranscript ReadTranscriptJsonl(std::istream& is) {
  TimedTranscript t;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      t.words.push_back({j.at("text").get<std::string>(), j.at("start").get<double>(), j.at("end").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("transcript line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  t.Validate();
  return t;
}

void SaveTranscript(const std::string& path, const TimedTranscript& transcript) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  WriteTranscriptJsonl(os, transcript);
}

TimedTranscript LoadTranscript(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  return ReadTranscriptJsonl(is);
}

namespace {

void CheckAlignment(const AlignmentMap& a, const TimedTranscript& source) {
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] < 1 || a[j] > source.size()) {
      throw std::out_of_range("alignment a_" + std::to_string(j + 1) + " = " + std::to_string(a[j]) +
                              " outside 1.." + std::to_string(source.size()));
    }
  }
}

double SourceEnd(const TimedTranscript& source, int i) { return source.words[i - 1].end; }

}  // namespace

std::vector<double> ComputeLags(const TimedTranscript& source, const TimedTranscript& target,
                                const AlignmentMap& a) {
  if (static_cast<int>(a.size()) != target.size()) throw std::invalid_argument("alignment length differs from target");
  CheckAlignment(a, source);
  std::vector<double> lags(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) lags[j] = target.words[j].start - SourceEnd(source, a[j]);
  return lags;
}

double SpikeCap(const AlignmentMap& a, const TimedTranscript& source, int j, SpikeOptions options) {
  const int m = static_cast<int>(a.size());
  const int half = options.window / 2;
  const int lo = std::max(0, j - half);
  const int hi = std::min(m - 1, j + (options.window - 1 - half));
  double sum = 0;
  int count = 0;
  for (int k = lo; k <= hi; ++k) {
    if (k == j) continue;
    sum += SourceEnd(source, a[k]);
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return (1.0 + options.threshold) * sum / count;
}

AlignmentMap SmoothSpikes(const AlignmentMap& a, const TimedTranscript& source, SpikeOptions options) {
  if (options.window < 1) throw std::invalid_argument("spike window must be >= 1");
  CheckAlignment(a, source);
  AlignmentMap out = a;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int j = 0; j < static_cast<int>(out.size()); ++j) {
      const double cap = SpikeCap(out, source, j, options);
      if (SourceEnd(source, out[j]) <= cap) continue;
      int best = 1;
      for (int i = 1; i <= source.size(); ++i) {
        if (SourceEnd(source, i) <= cap) best = i;
      }
      if (best < out[j]) {
        out[j] = best;
        changed = true;
      }
    }
  }
  return out;
}

TimedTranscript InsertSilences(const TimedTranscript& target, const TimedTranscript& source,
                               const AlignmentMap& a, double min_lag_s) {
  if (static_cast<int>(a.size()) != target.size()) throw std::invalid_argument("alignment length differs from target");
  CheckAlignment(a, source);
  TimedTranscript out = target;
  double shift = 0;
  double prev_end = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < target.size(); ++j) {
    const auto& w = target.words[j];
    const double start = std::max({prev_end, w.start + shift, SourceEnd(source, a[j]) + min_lag_s});
    shift = start - w.start;
    out.words[j].start = start;
    out.words[j].end = start + w.duration();
    prev_end = out.words[j].end;
  }
  return out;
}

PaddingPenalty PaddingPenaltyForLag(double lag_s) {
  if (lag_s < 0) return {0.0, true};
  return {-2.0 * std::clamp(lag_s - 1.0, 0.0, 1.0), false};
}

LagSummary SummarizeLags(std::span<const double> lags, double min_lag_s) {
  LagSummary s;
  if (lags.empty()) return s;
  s.min = *std::min_element(lags.begin(), lags.end());
  s.max = *std::max_element(lags.begin(), lags.end());
  for (double l : lags) {
    s.mean += l / static_cast<double>(lags.size());
    if (l < min_lag_s - 1e-9) ++s.violations;
  }
  return s;
}

}  // namespace simtrans
