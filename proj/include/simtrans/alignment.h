#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "simtrans/tensor.h"

namespace simtrans {

using Words = std::vector<std::string>;

// Conditional log-likelihood of target_word given a source prefix and the
// target prefix preceding it.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double Score(std::span<const std::string> source_prefix,
                       std::span<const std::string> target_prefix,
                       const std::string& target_word) const = 0;
  // True when Score may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }
};

// Always returns the same value.
class ConstantScorer : public Scorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double Score(std::span<const std::string>, std::span<const std::string>,
               const std::string&) const override {
    return value_;
  }
  bool concurrent_safe() const override { return true; }

 private:
  double value_;
};

// Target word j scores log(high) once the source prefix reaches switch_at[j]
// words and log(low) before. Target word j is identified by the length of its
// target prefix, not by its text.
class StepScorer : public Scorer {
 public:
  explicit StepScorer(std::vector<int> switch_at, double high = 0.9, double low = 0.1);
  double Score(std::span<const std::string> source_prefix,
               std::span<const std::string> target_prefix,
               const std::string& target_word) const override;
  bool concurrent_safe() const override { return true; }

 private:
  std::vector<int> switch_at_;
  double log_high_, log_low_;
};

// Word translation table learned from sentence pairs with a few rounds of
// expectation maximization. A target word is scored by its best translation
// probability against any source word seen so far, never below its corpus
// frequency.
class WordTableScorer : public Scorer {
 public:
  struct Options {
    int iterations = 8;
    double floor = 1e-4;
  };
  static WordTableScorer Train(std::span<const Words> sources, std::span<const Words> targets,
                               Options options);
  static WordTableScorer Train(std::span<const Words> sources, std::span<const Words> targets) {
    return Train(sources, targets, Options());
  }
  double Score(std::span<const std::string> source_prefix,
               std::span<const std::string> target_prefix,
               const std::string& target_word) const override;
  bool concurrent_safe() const override { return true; }
  double Probability(const std::string& target_word, const std::string& source_word) const;

 private:
  std::vector<std::string> src_vocab_, tgt_vocab_;
  MatrixD table_;  // target x source
  std::vector<double> prior_;  // target word frequency
  double floor_ = 1e-4;
  int SourceId(const std::string& w) const;
  int TargetId(const std::string& w) const;
};

// Memoizes another scorer on the full (source prefix, target prefix, word)
// key. Thread safe when the wrapped scorer is.
class CachedScorer : public Scorer {
 public:
  explicit CachedScorer(const Scorer& inner) : inner_(inner) {}
  double Score(std::span<const std::string> source_prefix,
               std::span<const std::string> target_prefix,
               const std::string& target_word) const override;
  bool concurrent_safe() const override { return inner_.concurrent_safe(); }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  const Scorer& inner_;
  mutable std::mutex mu_;
  mutable std::map<std::string, double> cache_;
  mutable std::size_t hits_ = 0, misses_ = 0;
};

// m x (n + 1) table; column 0 holds the empty-source-prefix score.
struct LoglikTable {
  MatrixD values;
  int m() const { return static_cast<int>(values.rows()); }
  int n() const { return static_cast<int>(values.cols()) - 1; }
};

struct LoglikOptions {
  int threads = 1;  // used only with a concurrent-safe scorer
};

// Entry (j, i) = scorer(S[1..i], T[1..j-1], T_j) for i = 0..n. Scorer failures
// are rethrown as std::runtime_error naming (j, i), 1-based.
LoglikTable LoglikMatrix(const Scorer& scorer, std::span<const std::string> source,
                         std::span<const std::string> target, LoglikOptions options = {});

// 1-based source index per target word.
using AlignmentMap = std::vector<int>;

// Per row, the i in 1..n with the largest increase over column i - 1; ties go
// to the smallest i.
AlignmentMap ContextualAlign(const LoglikTable& table);

// "j<TAB>a_j<TAB>delta" per line, j and a_j 1-based.
void WriteAlignment(std::ostream& os, const AlignmentMap& a, const LoglikTable& table);
// Same layout without the delta column.
void WriteAlignment(std::ostream& os, const AlignmentMap& a);
AlignmentMap ReadAlignment(std::istream& is);
void WriteLoglikCsv(std::ostream& os, const LoglikTable& table);

}  // namespace simtrans
