#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "simtrans/inference.h"
#include "simtrans/timing.h"
#include "test_support.h"

using namespace simtrans;
using simtrans::testing::MicroConfig;

namespace {

TokenGrid RandomSource(const ModelConfig& c, int frames, Rng& rng) {
  TokenGrid g(frames, c.levels);
  for (auto& t : g.tokens) t = static_cast<Token>(rng.Int(kAudioFirstCode, c.audio_vocab - 1));
  return g;
}

RowVector<float> RandomRow(Rng& rng, int n) {
  RowVector<float> r(n);
  for (int k = 0; k < n; ++k) r[k] = static_cast<float>(rng.Normal());
  return r;
}

}  // namespace

TEST_CASE("cfg identity, swap and affine combination") {
  Rng rng(1);
  LogitBundle good{RandomRow(rng, 6), {RandomRow(rng, 9), RandomRow(rng, 9)}};
  LogitBundle bad{RandomRow(rng, 6), {RandomRow(rng, 9), RandomRow(rng, 9)}};
  const LogitBundle one = CfgCombine(good, bad, 1.0f);
  const LogitBundle zero = CfgCombine(good, bad, 0.0f);
  CHECK(one.text == good.text);
  CHECK(zero.text == bad.text);
  CHECK(one.audio[1] == good.audio[1]);
  CHECK(zero.audio[0] == bad.audio[0]);
  const LogitBundle three = CfgCombine(good, bad, 3.0f);
  for (int k = 0; k < 6; ++k) CHECK(three.text[k] == 3.0f * good.text[k] + (1.0f - 3.0f) * bad.text[k]);
  CHECK_THROWS_AS(CfgCombine(good.text, good.audio[0], 2.0f), std::invalid_argument);
}

TEST_CASE("sampling config presets and validation") {
  CHECK(SamplingConfig::Preset("long").temperature_text == 0.8);
  CHECK(SamplingConfig::Preset("short").temperature_text == 0.1);
  CHECK(SamplingConfig::Preset("short").top_k_audio == 250);
  CHECK(SamplingConfig::Preset("short").top_k_text == 50);
  CHECK_THROWS_AS(SamplingConfig::Preset("medium"), std::invalid_argument);
  SamplingConfig bad;
  bad.top_k_text = 0;
  CHECK_THROWS_AS(bad.Validate(), std::invalid_argument);
}

TEST_CASE("greedy sampling and one-hot logits") {
  Rng rng(2);
  const std::vector<float> l = {0.1f, 2.0f, 2.0f, -1.0f};
  CHECK(SampleToken(l, 0.0, 1, rng) == 1);
  const float ninf = -std::numeric_limits<float>::infinity();
  const std::vector<float> onehot = {ninf, ninf, 0.0f, ninf};
  for (int k = 0; k < 100; ++k) CHECK(SampleToken(onehot, 0.8, 3, rng) == 2);
  // top-k of one is argmax.
  CHECK(SampleToken(l, 5.0, 1, rng) == 1);
  const std::vector<float> all_ninf = {ninf, ninf};
  CHECK_THROWS_AS(SampleToken(all_ninf, 1.0, 2, rng), std::invalid_argument);
}

TEST_CASE("sampling frequencies follow the truncated tempered softmax") {
  Rng rng(3);
  const std::vector<float> l = {1.0f, 0.2f, -0.5f, 0.9f, -3.0f};
  const double temp = 0.8;
  const int top_k = 3;
  // Kept ids are 0, 3, 1.
  std::map<int, double> expect;
  double z = 0;
  for (int k : {0, 3, 1}) {
    expect[k] = std::exp(l[k] / temp);
    z += expect[k];
  }
  for (auto& [k, p] : expect) p /= z;
  const int draws = 40000;
  std::map<int, int> counts;
  for (int d = 0; d < draws; ++d) ++counts[SampleToken(l, temp, top_k, rng)];
  double tv = 0;
  for (int k = 0; k < 5; ++k) tv += std::abs(counts[k] / double(draws) - expect[k]);
  CHECK(counts[2] == 0);
  CHECK(counts[4] == 0);
  CHECK(0.5 * tv < 0.01);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a = Rng::Stream(5, 1), b = Rng::Stream(5, 1), c = Rng::Stream(5, 2);
  const auto x = a.Next();
  CHECK(x == b.Next());
  CHECK(x != c.Next());
}

TEST_CASE("session output depends only on consumed source frames") {
  const ModelConfig c = MicroConfig();
  Rng rng(4);
  const RqTransformer<float> model(c, 4);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Greedy();
  sc.cap_extra = 0;
  const TokenGrid src = RandomSource(c, 10, rng);
  const SessionResult base = RunSession(model, src, sc);
  for (int trial = 0; trial < 10; ++trial) {
    TokenGrid mutated = src;
    const int t = rng.Int(1, 9);
    mutated.at(t, rng.Int(0, c.levels - 1)) = static_cast<Token>(rng.Int(kAudioFirstCode, c.audio_vocab - 1));
    const SessionResult r = RunSession(model, mutated, sc);
    for (int u = 0; u < t; ++u) {
      CHECK(r.frames.text(u) == base.frames.text(u));
      for (int q = 0; q < c.levels; ++q) CHECK(r.frames.target(u, q) == base.frames.target(u, q));
    }
  }
}

TEST_CASE("batched decoding equals sequential decoding") {
  const ModelConfig c = MicroConfig();
  Rng rng(6);
  const RqTransformer<float> model(c, 6);
  std::vector<TokenGrid> sources;
  for (int b = 0; b < 5; ++b) sources.push_back(RandomSource(c, rng.Int(3, 8), rng));
  for (const bool greedy : {true, false}) {
    for (const bool cfg : {false, true}) {
      SessionConfig sc;
      sc.sampling = greedy ? SamplingConfig::Greedy() : SamplingConfig::Preset("long");
      sc.sampling.seed = 77;
      sc.use_cfg = cfg;
      sc.cap_extra = 4;
      const auto batched = RunBatched(model, sources, sc);
      for (int b = 0; b < 5; ++b) {
        const SessionResult single = RunSession(model, sources[b], sc, b);
        CHECK(batched[b].frames == single.frames);
        CHECK(batched[b].truncated == single.truncated);
      }
    }
  }
}

TEST_CASE("text eos ends the session after the flush frames") {
  const ModelConfig c = MicroConfig();
  Rng rng(7);
  const RqTransformer<float> model(c, 7);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Greedy();
  // Echo policy: pad while the source runs, EOS once it has ended.
  sc.text_processor = [](const Session& s, RowVector<float>& logits) {
    logits.setConstant(0.0f);
    logits[s.state() == SessionState::kRunning ? kTextPad : kTextEos] = 10.0f;
  };
  TokenGrid src = RandomSource(c, 6, rng);
  for (int q = 0; q < c.levels; ++q) src.at(4, q) = kAudioInputEos;
  for (int flush : {-1, 0, 3}) {
    sc.flush_frames = flush;
    const SessionResult r = RunSession(model, src, sc);
    const int expect_flush = flush < 0 ? c.delay_steps : flush;
    CHECK(r.finished);
    CHECK_FALSE(r.truncated);
    CHECK(r.text_eos_frame == 5);
    CHECK(r.frames.frames() == 6 + expect_flush);
  }
  // Without EOS in the given frames one is appended after the source.
  const TokenGrid plain = RandomSource(c, 3, rng);
  sc.flush_frames = -1;
  const SessionResult r = RunSession(model, plain, sc);
  CHECK(r.frames.source(3, 0) == kAudioInputEos);
  CHECK(r.text_eos_frame == 4);
}

TEST_CASE("eos is masked while the source runs and the cap truncates") {
  const ModelConfig c = MicroConfig();
  Rng rng(8);
  const RqTransformer<float> model(c, 8);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Greedy();
  sc.cap_extra = 5;
  sc.text_processor = [](const Session&, RowVector<float>& logits) {
    logits.setConstant(0.0f);
    logits[kTextEos] = 10.0f;
    logits[kTextPad] = 5.0f;
  };
  const TokenGrid src = RandomSource(c, 6, rng);
  const SessionResult r = RunSession(model, src, sc);
  // Source frames 0..5 then the appended EOS at 6: EOS is first legal at 7.
  for (int t = 0; t <= 6; ++t) CHECK(r.frames.text(t) != kTextEos);
  CHECK(r.text_eos_frame == 7);

  SessionConfig never = sc;
  never.text_processor = [](const Session&, RowVector<float>& logits) {
    logits.setConstant(0.0f);
    logits[kTextPad] = 10.0f;
  };
  const SessionResult cut = RunSession(model, src, never);
  CHECK(cut.truncated);
  CHECK(cut.frames.frames() == 6 + 5);
}

TEST_CASE("acoustic levels stay padded during the delay") {
  ModelConfig c = MicroConfig();
  c.delay_steps = 2;
  Rng rng(9);
  const RqTransformer<float> model(c, 9);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Preset("long");
  const SessionResult r = RunSession(model, RandomSource(c, 5, rng), sc);
  for (int t = 0; t < 2; ++t) CHECK(r.frames.target(t, 1) == kAudioDelayPad);
}

TEST_CASE("padding penalty as a text processor forces padding") {
  const ModelConfig c = MicroConfig();
  Rng rng(10);
  const RqTransformer<float> model(c, 10);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Greedy();
  sc.cap_extra = 0;
  sc.text_processor = [](const Session&, RowVector<float>& logits) {
    ApplyPaddingPenalty(PaddingPenaltyForLag(-1.0), kTextPad, logits);
  };
  const SessionResult r = RunSession(model, RandomSource(c, 6, rng), sc);
  for (int t = 0; t < r.frames.frames(); ++t) CHECK(r.frames.text(t) == kTextPad);
}

TEST_CASE("bench emits one row per batch size and guidance setting") {
  const ModelConfig c = MicroConfig();
  Rng rng(11);
  const RqTransformer<float> model(c, 11);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Greedy();
  sc.cap_extra = 2;
  const std::vector<int> sizes = {1, 2, 4};
  const auto rows = RunBench(model, RandomSource(c, 4, rng), sizes, sc);
  REQUIRE(rows.size() == 6);
  const std::string csv = BenchCsv(rows);
  CHECK(csv.rfind("batch,cfg,wall_s,rtf,per_sequence_rtf\n", 0) == 0);
  for (const auto& row : rows) {
    CHECK(row.rtf > 0);
    CHECK(row.per_sequence_rtf == doctest::Approx(row.rtf / row.batch));
  }
}
