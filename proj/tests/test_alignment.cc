#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "simtrans/alignment.h"
#include "simtrans/errors.h"
#include "simtrans/rng.h"

using namespace simtrans;

namespace {

Words Numbered(const std::string& prefix, int n) {
  Words w;
  for (int i = 0; i < n; ++i) w.push_back(prefix + std::to_string(i));
  return w;
}

// Largest increase by direct scorer calls, smallest index on ties.
AlignmentMap BruteForceAlign(const Scorer& s, const Words& src, const Words& tgt) {
  AlignmentMap a;
  for (std::size_t j = 0; j < tgt.size(); ++j) {
    const std::span<const std::string> prefix(tgt.data(), j);
    int best = 1;
    double best_d = -1e300;
    for (std::size_t i = 1; i <= src.size(); ++i) {
      const double d = s.Score(std::span(src.data(), i), prefix, tgt[j]) -
                       s.Score(std::span(src.data(), i - 1), prefix, tgt[j]);
      if (d > best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    a.push_back(best);
  }
  return a;
}

class ThrowingScorer : public Scorer {
 public:
  double Score(std::span<const std::string> s, std::span<const std::string>, const std::string&) const override {
    if (s.size() == 2) throw std::runtime_error("boom");
    return 0;
  }
};

class NanScorer : public Scorer {
 public:
  double Score(std::span<const std::string>, std::span<const std::string>, const std::string&) const override {
    return std::nan("");
  }
};

}  // namespace

TEST_CASE("loglik table layout") {
  const Words src = Numbered("s", 3);
  const Words tgt = Numbered("t", 2);
  const StepScorer scorer({2, 3});
  const LoglikTable t = LoglikMatrix(scorer, src, tgt);
  CHECK(t.m() == 2);
  CHECK(t.n() == 3);
  CHECK(t.values(0, 1) == doctest::Approx(std::log(0.1)));
  CHECK(t.values(0, 2) == doctest::Approx(std::log(0.9)));
  CHECK(t.values(1, 2) == doctest::Approx(std::log(0.1)));
  CHECK(t.values(1, 3) == doctest::Approx(std::log(0.9)));
}

TEST_CASE("step scorer alignments are recovered exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.Int(1, 12);
    const int m = rng.Int(1, 12);
    std::vector<int> planted(m);
    for (int& a : planted) a = rng.Int(1, n);
    const StepScorer scorer(planted);
    const Words src = Numbered("s", n);
    const Words tgt = Numbered("t", m);
    const AlignmentMap a = ContextualAlign(LoglikMatrix(scorer, src, tgt));
    CHECK(a == planted);
    CHECK(a == BruteForceAlign(scorer, src, tgt));
  }
}

TEST_CASE("flat scores align to the first source word") {
  const ConstantScorer scorer(-1.5);
  const AlignmentMap a = ContextualAlign(LoglikMatrix(scorer, Numbered("s", 4), Numbered("t", 3)));
  CHECK(a == AlignmentMap{1, 1, 1});
}

TEST_CASE("threaded table equals the serial one") {
  Rng rng(2);
  std::vector<int> planted(9);
  for (int& a : planted) a = rng.Int(1, 7);
  const StepScorer scorer(planted);
  LoglikOptions four;
  four.threads = 4;
  const auto serial = LoglikMatrix(scorer, Numbered("s", 7), Numbered("t", 9));
  const auto parallel = LoglikMatrix(scorer, Numbered("s", 7), Numbered("t", 9), four);
  CHECK(serial.values == parallel.values);
}

TEST_CASE("scorer failures name the cell") {
  const ThrowingScorer scorer;
  CHECK_THROWS_WITH_AS(LoglikMatrix(scorer, Numbered("s", 3), Numbered("t", 2)),
                       doctest::Contains("(j=1, i=2)"), std::runtime_error);
  const NanScorer nan;
  CHECK_THROWS_AS(LoglikMatrix(nan, Numbered("s", 3), Numbered("t", 2)), std::runtime_error);
  CHECK_THROWS_AS(LoglikMatrix(nan, Words{}, Numbered("t", 2)), std::invalid_argument);
}

TEST_CASE("word table learns a substitution and aligns reordered pairs") {
  // Deterministic lexicon s_k -> t_k on random sentences, adjacent swaps in
  // some targets.
  Rng rng(5);
  std::vector<Words> sources, targets;
  std::vector<AlignmentMap> truth;
  for (int k = 0; k < 300; ++k) {
    const int n = rng.Int(4, 8);
    Words s, t;
    AlignmentMap a;
    std::vector<int> ids;
    while (static_cast<int>(ids.size()) < n) {
      const int w = rng.Int(0, 19);
      if (std::find(ids.begin(), ids.end(), w) == ids.end()) ids.push_back(w);
    }
    for (int w : ids) s.push_back("s" + std::to_string(w));
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n && ids[i] % 5 == 0) {
        t.push_back("t" + std::to_string(ids[i + 1]));
        a.push_back(i + 2);
        t.push_back("t" + std::to_string(ids[i]));
        a.push_back(i + 1);
        ++i;
      } else {
        t.push_back("t" + std::to_string(ids[i]));
        a.push_back(i + 1);
      }
    }
    sources.push_back(s);
    targets.push_back(t);
    truth.push_back(a);
  }
  const WordTableScorer scorer = WordTableScorer::Train(sources, targets);
  CHECK(scorer.Probability("t3", "s3") > 0.9);
  CHECK(scorer.Probability("t3", "s4") < 0.05);
  CHECK(scorer.Probability("t3", "unknown") == 0.0);
  int exact = 0, total = 0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const AlignmentMap a = ContextualAlign(LoglikMatrix(scorer, sources[k], targets[k]));
    for (std::size_t j = 0; j < a.size(); ++j) exact += a[j] == truth[k][j];
    total += static_cast<int>(a.size());
  }
  CHECK(exact == total);
}

TEST_CASE("cached scorer returns the inner values and counts hits") {
  const StepScorer inner({1, 2});
  const CachedScorer cached(inner);
  const Words src = Numbered("s", 3);
  const Words tgt = Numbered("t", 2);
  const auto a = LoglikMatrix(cached, src, tgt);
  CHECK(cached.misses() == 8);
  const auto b = LoglikMatrix(cached, src, tgt);
  CHECK(cached.hits() == 8);
  CHECK(a.values == b.values);
  CHECK(a.values == LoglikMatrix(inner, src, tgt).values);
}

TEST_CASE("alignment files round trip") {
  const StepScorer scorer({2, 1, 3});
  const auto table = LoglikMatrix(scorer, Numbered("s", 3), Numbered("t", 3));
  const AlignmentMap a = ContextualAlign(table);
  std::stringstream ss;
  WriteAlignment(ss, a, table);
  CHECK(ReadAlignment(ss) == a);
  std::stringstream plain;
  WriteAlignment(plain, a);
  CHECK(ReadAlignment(plain) == a);
  std::stringstream bad("1\t2\n3\t1\n");
  CHECK_THROWS_AS(ReadAlignment(bad), DataError);
  std::stringstream csv;
  WriteLoglikCsv(csv, table);
  CHECK(csv.str().substr(0, 12) == "j,i0,i1,i2,i");
}
