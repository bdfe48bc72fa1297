#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "simtrans/errors.h"
#include "simtrans/rng.h"
#include "simtrans/timing.h"

using namespace simtrans;

namespace {

TimedTranscript Transcript(std::initializer_list<std::pair<double, double>> spans, const std::string& prefix = "w") {
  TimedTranscript t;
  int k = 0;
  for (auto [s, e] : spans) t.words.push_back({prefix + std::to_string(k++), s, e});
  return t;
}

// Contiguous random words with gaps.
TimedTranscript RandomTranscript(Rng& rng, int n, const std::string& prefix) {
  TimedTranscript t;
  double cursor = rng.Uniform(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    const double d = rng.Uniform(0.1, 0.8);
    t.words.push_back({prefix + std::to_string(k), cursor, cursor + d});
    cursor += d + rng.Uniform(0.0, 0.5);
  }
  return t;
}

AlignmentMap RandomMonotoneish(Rng& rng, int m, int n) {
  AlignmentMap a(m);
  for (int& x : a) x = rng.Int(1, n);
  return a;
}

}  // namespace

TEST_CASE("transcript validation and jsonl round trip") {
  const TimedTranscript t = Transcript({{0.0, 0.5}, {0.5, 1.25}});
  CHECK_NOTHROW(t.Validate());
  std::stringstream ss;
  WriteTranscriptJsonl(ss, t);
  CHECK(ss.str().find("\"text\"") != std::string::npos);
  CHECK(ReadTranscriptJsonl(ss) == t);
  CHECK(t.texts() == std::vector<std::string>{"w0", "w1"});
  CHECK_THROWS_AS(Transcript({{1.0, 1.0}}).Validate(), DataError);
  CHECK_THROWS_AS(Transcript({{1.0, 2.0}, {0.5, 3.0}}).Validate(), DataError);
  std::stringstream bad("{\"text\": \"x\", \"start\": 0.1}\n");
  CHECK_THROWS_AS(ReadTranscriptJsonl(bad), DataError);
}

TEST_CASE("lags are target start minus aligned source end") {
  const TimedTranscript src = Transcript({{0.0, 1.0}, {1.0, 3.5}});
  const TimedTranscript tgt = Transcript({{1.0, 2.0}, {5.5, 6.0}});
  const auto lags = ComputeLags(src, tgt, {1, 2});
  CHECK(lags[0] == doctest::Approx(0.0));
  CHECK(lags[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(ComputeLags(src, tgt, {1, 3}), std::out_of_range);
  CHECK_THROWS_AS(ComputeLags(src, tgt, {1}), std::invalid_argument);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = RandomTranscript(rng, 6, "s");
    const auto t = RandomTranscript(rng, 5, "t");
    const auto a = RandomMonotoneish(rng, 5, 6);
    const auto l = ComputeLags(s, t, a);
    for (int j = 0; j < 5; ++j) CHECK(l[j] == t.words[j].start - s.words[a[j] - 1].end);
  }
}

TEST_CASE("planted spike is smoothed under the cap") {
  const TimedTranscript src = Transcript({{1.5, 2.0}, {2.1, 9.0}});
  const AlignmentMap a = {1, 1, 2, 1, 1};
  CHECK(SpikeCap(a, src, 2) == doctest::Approx(2.5));
  const AlignmentMap s = SmoothSpikes(a, src);
  CHECK(s == AlignmentMap{1, 1, 1, 1, 1});
  // A constant alignment has nothing to smooth.
  CHECK(SmoothSpikes(AlignmentMap{2, 2, 2}, src) == AlignmentMap{2, 2, 2});
  // A single word has no neighbours.
  CHECK(std::isinf(SpikeCap(AlignmentMap{2}, src, 0)));
}

TEST_CASE("smoothing meets the cap and is idempotent on random instances") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.Int(1, 15);
    const int m = rng.Int(1, 15);
    const auto src = RandomTranscript(rng, n, "s");
    const auto a = RandomMonotoneish(rng, m, n);
    const auto s = SmoothSpikes(a, src);
    for (int j = 0; j < m; ++j) {
      CHECK(s[j] <= a[j]);
      CHECK(src.words[s[j] - 1].end <= SpikeCap(s, src, j) + 1e-12);
    }
    CHECK(SmoothSpikes(s, src) == s);
  }
}

TEST_CASE("silence insertion example") {
  const TimedTranscript src = Transcript({{0.0, 1.0}, {2.0, 3.5}});
  const TimedTranscript tgt = Transcript({{1.0, 1.5}, {1.5, 2.0}, {6.5, 7.0}});
  const TimedTranscript out = InsertSilences(tgt, src, {2, 2, 2}, 2.0);
  CHECK(out.words[0].start == doctest::Approx(5.5));
  CHECK(out.words[1].start == doctest::Approx(6.0));
  CHECK(out.words[2].start == doctest::Approx(11.0));
  CHECK(out.words[0].duration() == doctest::Approx(0.5));
  // Already causal: unchanged.
  const TimedTranscript late = Transcript({{4.0, 4.5}, {6.0, 7.0}});
  CHECK(InsertSilences(late, src, {1, 2}, 2.0) == late);
}

TEST_CASE("silence insertion postcondition on random instances") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = RandomTranscript(rng, rng.Int(1, 12), "s");
    const auto tgt = RandomTranscript(rng, rng.Int(1, 12), "t");
    const auto a = RandomMonotoneish(rng, tgt.size(), src.size());
    const auto out = InsertSilences(tgt, src, a, 2.0);
    REQUIRE(out.size() == tgt.size());
    for (int j = 0; j < out.size(); ++j) {
      CHECK(out.words[j].start >= src.words[a[j] - 1].end + 2.0 - 1e-9);
      CHECK(out.words[j].start >= tgt.words[j].start - 1e-12);
      CHECK(out.words[j].duration() == doctest::Approx(tgt.words[j].duration()));
      CHECK(out.words[j].text == tgt.words[j].text);
      if (j > 0) CHECK(out.words[j].start >= out.words[j - 1].end - 1e-9);
    }
  }
}

TEST_CASE("padding penalty schedule") {
  CHECK(PaddingPenaltyForLag(0.5).bias == 0.0);
  CHECK_FALSE(PaddingPenaltyForLag(0.5).force_pad);
  CHECK(PaddingPenaltyForLag(1.5).bias == doctest::Approx(-1.0));
  CHECK(PaddingPenaltyForLag(3.0).bias == -2.0);
  CHECK(PaddingPenaltyForLag(-0.1).force_pad);
  double prev = 1;
  for (int k = 0; k <= 1000; ++k) {
    const double b = PaddingPenaltyForLag(k * 0.004).bias;
    CHECK(b <= prev);
    prev = b;
  }
  RowVector<float> logits = RowVector<float>::Zero(4);
  ApplyPaddingPenalty(PaddingPenaltyForLag(1.5), 0, logits);
  CHECK(logits[0] == doctest::Approx(-1.0));
  ApplyPaddingPenalty(PaddingPenaltyForLag(-1), 0, logits);
  CHECK(std::isinf(logits[2]));
  CHECK(logits[0] == doctest::Approx(-1.0));
}

TEST_CASE("lag summary counts violations") {
  const std::vector<double> lags = {1.0, 2.0, 3.0};
  const LagSummary s = SummarizeLags(lags, 2.0);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  CHECK(s.violations == 1);
}
