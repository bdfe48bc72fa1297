// Acceptance suite: one PASS/FAIL line per criterion, also written to
// acceptance_results.txt. Optional arguments pick criteria by number, e.g.
// `acceptance 1 2 13`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "simtrans/alignment.h"
#include "simtrans/codec.h"
#include "simtrans/config.h"
#include "simtrans/experiment.h"
#include "simtrans/inference.h"
#include "simtrans/metrics.h"
#include "simtrans/streams.h"
#include "simtrans/timing.h"
#include "test_support.h"

using namespace simtrans;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Delay round trip.

Outcome DelayRoundTrip() {
  Rng rng(101);
  int checked = 0, bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    TokenGrid g(rng.Int(1, 40), rng.Int(1, 8));
    for (auto& t : g.tokens) t = static_cast<Token>(rng.Int(kAudioFirstCode, 2050));
    for (int delay = 0; delay <= 5; ++delay) {
      const TokenGrid d = ApplyAcousticDelay(g, delay);
      const TokenGrid r = RemoveAcousticDelay(d, delay);
      if (r.frames != std::max(g.frames - delay, 0)) ++bad;
      for (int t = 0; t < r.frames; ++t) {
        for (int q = 0; q < g.levels; ++q) bad += r.at(t, q) != g.at(t, q);
      }
      // Level zero is never shifted; higher levels lag by exactly `delay`.
      for (int t = 0; t < d.frames; ++t) {
        bad += d.at(t, 0) != g.at(t, 0);
        for (int q = 1; q < g.levels; ++q) {
          const Token expect = t < delay ? kAudioDelayPad : g.at(t - delay, q);
          bad += d.at(t, q) != expect;
        }
      }
      ++checked;
    }
  }
  return {bad == 0, Fmt("%d grid/delay pairs, %d mismatches", checked, bad)};
}

// ---------------------------------------------------------------------------
// 2. RVQ encode against brute force.

Outcome RvqOracle() {
  CodecConfig c;
  c.latent_dim = 8;
  c.num_levels = 4;
  c.codebook_size = 16;
  Rng rng(202);
  const auto books = InitCodebooksRandom<double>(c, rng);
  MatrixD x(1000, c.latent_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 1.5 * rng.Normal();
  // Duplicate a few rows onto codebook entries to exercise exact ties.
  for (int r = 0; r < 10; ++r) x.row(r) = books.entries[0].row(r % c.codebook_size);
  const TokenGrid got = RvqEncode(x, books);
  int bad = 0;
  for (int t = 0; t < x.rows(); ++t) {
    std::vector<double> residual(x.row(t).data(), x.row(t).data() + c.latent_dim);
    for (int q = 0; q < c.num_levels; ++q) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < c.codebook_size; ++k) {
        double d = 0;
        for (int i = 0; i < c.latent_dim; ++i) {
          const double diff = residual[i] - books.entries[q](k, i);
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      bad += got.at(t, q) != best;
      for (int i = 0; i < c.latent_dim; ++i) residual[i] -= books.entries[q](best, i);
    }
  }
  return {bad == 0, Fmt("1000 frames x %d levels, %d mismatches", c.num_levels, bad)};
}

// ---------------------------------------------------------------------------
// 3. EMA codebook training on a two-component mixture.

Outcome CodecTraining() {
  CodecConfig c;
  c.latent_dim = 8;
  c.num_levels = 2;
  c.codebook_size = 8;
  Rng rng(303);
  MatrixD x(512, c.latent_dim);
  RowVector<double> mu_a(c.latent_dim), mu_b(c.latent_dim);
  for (int i = 0; i < c.latent_dim; ++i) {
    mu_a[i] = 3.0 + rng.Normal();
    mu_b[i] = -3.0 + rng.Normal();
  }
  for (int r = 0; r < x.rows(); ++r) {
    const auto& mu = rng.Bernoulli(0.5) ? mu_a : mu_b;
    for (int i = 0; i < c.latent_dim; ++i) x(r, i) = mu[i] + 0.5 * rng.Normal();
  }
  auto books = InitCodebooksRandom<double>(c, rng);
  const double baseline = ReconstructionMse(x, books);
  for (int s = 0; s < 200; ++s) CodebookTrainStep(x, books, 0.9, 0.25, rng);
  const double trained = ReconstructionMse(x, books);
  const double ratio = trained / baseline;
  return {books.AllFinite() && ratio <= 0.5, Fmt("error %.4f vs frozen %.4f (ratio %.3f)", trained, baseline, ratio)};
}

// ---------------------------------------------------------------------------
// 4. Contextual alignment on planted step scorers.

Outcome AlignmentRecovery() {
  Rng rng(404);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.Int(1, 12);
    const int m = rng.Int(1, 12);
    std::vector<int> planted(m);
    for (int& p : planted) p = rng.Int(1, n);
    const double high = rng.Uniform(0.5, 0.99);
    const double low = rng.Uniform(0.01, 0.4);
    const StepScorer scorer(planted, high, low);
    std::vector<std::string> src(n, "x"), tgt(m, "y");
    const LoglikTable table = LoglikMatrix(scorer, src, tgt);
    const AlignmentMap got = ContextualAlign(table);
    // Brute force: scan every source index, keep the first largest increase.
    AlignmentMap brute(m);
    for (int j = 0; j < m; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 1; i <= n; ++i) {
        const double inc = std::log(i >= planted[j] ? high : low) - std::log(i - 1 >= planted[j] ? high : low);
        if (inc > best) {
          best = inc;
          brute[j] = i;
        }
      }
    }
    exact += got == planted && brute == planted;
  }
  return {exact == 100, Fmt("%d/100 instances exact", exact)};
}

// ---------------------------------------------------------------------------
// 5. Spike smoothing.

TimedTranscript RandomTranscript(Rng& rng, int n) {
  TimedTranscript t;
  double cursor = rng.Uniform(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    // Occasional long words make spikes.
    const double d = rng.Bernoulli(0.2) ? rng.Uniform(2.0, 6.0) : rng.Uniform(0.1, 0.8);
    t.words.push_back({"s" + std::to_string(k), cursor, cursor + d});
    cursor += d + rng.Uniform(0.0, 0.5);
  }
  return t;
}

// 1.25 times the mean source end of the other words in a centered window of 5.
double OracleCap(const AlignmentMap& a, const TimedTranscript& src, int j) {
  double sum = 0;
  int count = 0;
  for (int k = j - 2; k <= j + 2; ++k) {
    if (k == j || k < 0 || k >= static_cast<int>(a.size())) continue;
    sum += src.words[a[k] - 1].end;
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::infinity() : 1.25 * sum / count;
}

Outcome SpikeSmoothing() {
  int violations = 0, not_idempotent = 0;
  TimedTranscript spike_src;
  spike_src.words = {{"a", 1.5, 2.0}, {"b", 2.1, 9.0}};
  const AlignmentMap planted = {1, 1, 2, 1, 1};
  const AlignmentMap fixed = SmoothSpikes(planted, spike_src);
  const bool example_ok = fixed == AlignmentMap{1, 1, 1, 1, 1};
  Rng rng(505);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.Int(1, 15);
    const int m = rng.Int(1, 15);
    const TimedTranscript src = RandomTranscript(rng, n);
    AlignmentMap a(m);
    for (int& x : a) x = rng.Int(1, n);
    const AlignmentMap s = SmoothSpikes(a, src);
    for (int j = 0; j < m; ++j) {
      violations += src.words[s[j] - 1].end > OracleCap(s, src, j);
      violations += s[j] > a[j];
    }
    not_idempotent += SmoothSpikes(s, src) != s;
  }
  return {example_ok && violations == 0 && not_idempotent == 0,
          Fmt("planted example %s, %d cap violations, %d non-idempotent", example_ok ? "fixed" : "wrong", violations,
              not_idempotent)};
}

// ---------------------------------------------------------------------------
// 6. Silence insertion.

Outcome SilenceCausality() {
  Rng rng(606);
  int violations = 0, words = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.Int(1, 15);
    const int m = rng.Int(1, 15);
    const TimedTranscript src = RandomTranscript(rng, n);
    const TimedTranscript tgt = RandomTranscript(rng, m);
    AlignmentMap a(m);
    for (int& x : a) x = rng.Int(1, n);
    const TimedTranscript out = InsertSilences(tgt, src, a, 2.0);
    for (int j = 0; j < m; ++j) {
      ++words;
      const auto& w = out.words[j];
      violations += !(w.start >= src.words[a[j] - 1].end + 2.0);
      violations += w.text != tgt.words[j].text;
      violations += std::abs(w.duration() - tgt.words[j].duration()) > 1e-12;
      violations += w.start < tgt.words[j].start;
      if (j > 0) violations += w.start < out.words[j - 1].end;
    }
  }
  return {violations == 0, Fmt("%d words, %d violations", words, violations)};
}

// ---------------------------------------------------------------------------
// 7. Padding penalty schedule.

Outcome PaddingSchedule() {
  const bool points = PaddingPenaltyForLag(0.5).bias == 0.0 && PaddingPenaltyForLag(1.5).bias == -1.0 &&
                      PaddingPenaltyForLag(3.0).bias == -2.0;
  int non_monotone = 0;
  double prev = PaddingPenaltyForLag(0.0).bias;
  for (int k = 1; k < 1000; ++k) {
    const double b = PaddingPenaltyForLag(4.0 * k / 999.0).bias;
    non_monotone += b > prev;
    prev = b;
  }
  const bool forced = PaddingPenaltyForLag(-0.1).force_pad;
  return {points && non_monotone == 0 && forced,
          Fmt("anchors %s, %d monotonicity breaks, negative lag %s", points ? "exact" : "wrong", non_monotone,
              forced ? "forces padding" : "does not force padding")};
}

// ---------------------------------------------------------------------------
// 8. Classifier-free guidance arithmetic.

Outcome CfgArithmetic() {
  Rng rng(808);
  int bad = 0;
  double worst = 0;
  auto row = [&rng](int n) {
    RowVector<float> r(n);
    for (int k = 0; k < n; ++k) r[k] = static_cast<float>(5 * rng.Normal());
    return r;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const LogitBundle good{row(40), {row(35), row(35), row(35)}};
    const LogitBundle bad_b{row(40), {row(35), row(35), row(35)}};
    const LogitBundle one = CfgCombine(good, bad_b, 1.0f);
    const LogitBundle zero = CfgCombine(good, bad_b, 0.0f);
    bad += one.text != good.text || zero.text != bad_b.text;
    for (std::size_t q = 0; q < good.audio.size(); ++q) {
      bad += one.audio[q] != good.audio[q] || zero.audio[q] != bad_b.audio[q];
    }
    const LogitBundle three = CfgCombine(good, bad_b, 3.0f);
    auto compare = [&](const RowVector<float>& got, const RowVector<float>& g, const RowVector<float>& b) {
      for (Eigen::Index k = 0; k < got.size(); ++k) {
        const double expect = 3.0 * g[k] - 2.0 * b[k];
        const double scale = std::max({1.0, std::abs(3.0 * g[k]), std::abs(2.0 * b[k])});
        const double err = std::abs(got[k] - expect) / scale;
        worst = std::max(worst, err);
        bad += err > 4 * std::numeric_limits<float>::epsilon();
      }
    };
    compare(three.text, good.text, bad_b.text);
    for (std::size_t q = 0; q < good.audio.size(); ++q) compare(three.audio[q], good.audio[q], bad_b.audio[q]);
  }
  return {bad == 0, Fmt("100 bundles, %d mismatches, worst relative error %.2e at gamma 3", bad, worst)};
}

// ---------------------------------------------------------------------------
// 9. Gradient check.

Outcome GradientCheck() {
  const auto r = testing::GradientCheck(testing::MicroConfig(), 50, 909);
  return {r.checked == 50 && r.max_rel_error < 1e-3,
          Fmt("%d parameters, max relative error %.2e", r.checked, r.max_rel_error)};
}

// ---------------------------------------------------------------------------
// 10. Streaming causality under source mutations.

Outcome CausalityMutation() {
  RunConfig rc;
  rc.Resolve();
  const ModelConfig c = rc.experiment.model;
  const RqTransformer<float> model(c, 1010);
  SessionConfig sc;
  sc.sampling = SamplingConfig::Preset("long");
  sc.sampling.seed = 5;
  sc.cap_extra = 4;
  Rng rng(1011);
  int mutations = 0, changed = 0;
  for (int seq = 0; seq < 20; ++seq) {
    TokenGrid src(rng.Int(8, 24), c.levels);
    for (auto& t : src.tokens) t = static_cast<Token>(rng.Int(kAudioFirstCode, c.audio_vocab - 1));
    const SessionResult base = RunSession(model, src, sc, seq);
    for (int k = 0; k < 20; ++k) {
      const int u = rng.Int(1, src.frames - 1);
      TokenGrid mutated = src;
      for (int q = 0; q < c.levels; ++q) {
        mutated.at(u, q) = static_cast<Token>(kAudioFirstCode + (src.at(u, q) - kAudioFirstCode + 1 +
                                                                 rng.Int(0, c.audio_vocab - kAudioFirstCode - 2)) %
                                                                    (c.audio_vocab - kAudioFirstCode));
      }
      const SessionResult r = RunSession(model, mutated, sc, seq);
      ++mutations;
      // Frames before u never saw the mutated source frame.
      for (int t = 0; t < u && t < r.frames.frames() && t < base.frames.frames(); ++t) {
        bool same = r.frames.text(t) == base.frames.text(t);
        for (int q = 0; q < c.levels; ++q) same = same && r.frames.target(t, q) == base.frames.target(t, q);
        if (!same) {
          ++changed;
          break;
        }
      }
    }
  }
  return {changed == 0, Fmt("%d mutations, %d changed earlier output", mutations, changed)};
}

// ---------------------------------------------------------------------------
// 11 and 12. Training runs, shared between criteria.

struct RunResult {
  EvalReport report;
  double train_s = 0;
  double eval_s = 0;
  std::size_t parameters = 0;
  TrainedSystem system;
};

RunConfig TaskRun(std::uint64_t seed, LagRegime regime) {
  RunConfig rc;
  rc.experiment.seed = seed;
  rc.experiment.task.seed = seed;
  rc.experiment.task.regime = regime;
  rc.Resolve();
  return rc;
}

SessionConfig GreedySession(const RunConfig& rc) {
  SessionConfig sc = rc.Session();
  sc.sampling = SamplingConfig::Greedy();
  sc.use_cfg = false;
  return sc;
}

const RunResult& TrainedRun(std::uint64_t seed, LagRegime regime) {
  static std::map<std::pair<std::uint64_t, LagRegime>, RunResult> cache;
  auto key = std::make_pair(seed, regime);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const RunConfig rc = TaskRun(seed, regime);
  RunResult r;
  r.system = TrainOnTask(rc.experiment);
  r.train_s = r.system.train_seconds;
  r.parameters = r.system.weights.NumParameters();
  const auto t0 = std::chrono::steady_clock::now();
  r.report = EvaluateOnTask(r.system, rc.task(), rc.experiment.eval_examples, GreedySession(rc));
  r.eval_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  [seed %llu %s] %s train_s=%.0f\n", static_cast<unsigned long long>(seed), RegimeName(regime).c_str(),
              FormatReport(r.report).c_str(), r.train_s);
  std::fflush(stdout);
  return cache.emplace(key, std::move(r)).first->second;
}

Outcome EndToEnd() {
  const RunResult& r = TrainedRun(1, LagRegime::kContextual);
  const double minutes = (r.train_s + r.eval_s) / 60.0;
  const bool pass = r.parameters <= 5'000'000 && r.report.accuracy >= 0.95 &&
                    std::abs(r.report.latency_frames) <= 2.0 && minutes <= 30.0;
  return {pass, Fmt("accuracy %.3f, latency %+.3f frames, %zu parameters, %.1f CPU-min", r.report.accuracy,
                    r.report.latency_frames, r.parameters, minutes)};
}

Outcome AblationOrdering() {
  const LagRegime regimes[] = {LagRegime::kNone, LagRegime::kConstant, LagRegime::kSentence, LagRegime::kContextual};
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::map<LagRegime, EvalReport> rep;
    for (LagRegime g : regimes) rep[g] = TrainedRun(seed, g).report;
    const auto& ctx = rep[LagRegime::kContextual];
    bool ok = true;
    for (LagRegime g : {LagRegime::kConstant, LagRegime::kSentence, LagRegime::kContextual}) {
      ok = ok && rep[LagRegime::kNone].accuracy < rep[g].accuracy;
    }
    for (LagRegime g : {LagRegime::kConstant, LagRegime::kSentence}) {
      ok = ok && rep[g].accuracy >= ctx.accuracy - 0.05 && rep[g].laal_s >= 2.0 * ctx.laal_s;
    }
    pass = pass && ok;
    detail += Fmt("%sseed %llu %s [acc/LAAL none %.3f/%.2f const %.3f/%.2f sent %.3f/%.2f ctx %.3f/%.2f]",
                  seed > 1 ? "; " : "", static_cast<unsigned long long>(seed), ok ? "ok" : "broken",
                  rep[LagRegime::kNone].accuracy, rep[LagRegime::kNone].laal_s, rep[LagRegime::kConstant].accuracy,
                  rep[LagRegime::kConstant].laal_s, rep[LagRegime::kSentence].accuracy,
                  rep[LagRegime::kSentence].laal_s, ctx.accuracy, ctx.laal_s);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 13. Latency metric fixtures.

Outcome LatencyFixtures() {
  struct Case {
    LatencyInputs in;
    double expect;
  };
  // Hand derived: rate = duration / max(|hyp|, n_ref); average d_i - (i-1)*rate
  // up to the first emission at or after the source end.
  const std::vector<Case> cases = {
      {{{3, 4, 5}, 4.0, 3}, (3.0 + (4.0 - 4.0 / 3.0)) / 2.0},
      {{{1, 2, 3, 4}, 4.0, 2}, 1.0},
      {{{5, 6}, 2.0, 2}, 5.0},
      {{{0.5, 1.0, 1.5, 2.0, 9.0}, 6.0, 5}, (0.5 + 1.0 - 1.2 + 1.5 - 2.4 + 2.0 - 3.6 + 9.0 - 4.8) / 5.0},
      {{{2.0, 2.5}, 10.0, 4}, (2.0 + 2.5 - 2.5) / 2.0},
  };
  double worst = 0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(Laal(c.in) - c.expect));
  const double offset_err = std::abs(EndOffset(10.0, 12.9) - 2.9);
  const bool pass = worst <= 1e-9 && offset_err <= 1e-9 && std::abs(Laal(cases[0].in) - 2.8333333333333335) <= 1e-9;
  return {pass, Fmt("%zu LAAL fixtures, worst error %.1e; end offset error %.1e", cases.size(), worst, offset_err)};
}

// ---------------------------------------------------------------------------
// 14. BLEU fixture.

Outcome BleuFixture() {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/bleu_fixture.tsv");
  if (!in) return {false, "fixture missing"};
  std::vector<std::string> hyps, refs;
  double corpus_ref = -1, worst = 0;
  std::string line;
  int pairs = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3) continue;
    if (cols[0] == "#corpus") {
      corpus_ref = std::stod(cols[2]);
      continue;
    }
    if (cols[0].starts_with("#")) continue;
    worst = std::max(worst, std::abs(SentenceBleu(cols[0], cols[1]) - std::stod(cols[2])));
    hyps.push_back(cols[0]);
    refs.push_back(cols[1]);
    ++pairs;
  }
  const double corpus_err = std::abs(CorpusBleu(hyps, refs) - corpus_ref);
  return {pairs == 20 && worst <= 0.1 && corpus_ref >= 0 && corpus_err <= 0.1,
          Fmt("%d pairs, worst sentence error %.4f, corpus error %.4f", pairs, worst, corpus_err)};
}

// ---------------------------------------------------------------------------
// 15. Batched decoding and the bench table.

Outcome BatchedEquivalence() {
  const RunResult& run = TrainedRun(1, LagRegime::kContextual);
  const RunConfig rc = TaskRun(1, LagRegime::kContextual);
  const SyntheticTask task(rc.task());
  const RqTransformer<float> model(run.system.model, run.system.weights);
  SessionConfig sc = GreedySession(rc);
  std::vector<TokenGrid> sources;
  std::vector<std::vector<Token>> pads;
  for (int b = 0; b < 8; ++b) {
    const SyntheticExample ex = task.GenerateExample(run.system.codebooks, kHeldOutIndex + 100 + b);
    sources.push_back(SplitMultistream(ex.streams).source);
    pads.push_back(task.SilenceTokens(run.system.codebooks, ex.source_speaker));
  }
  BatchOptions opt;
  opt.pad_frames = pads;
  const auto batched = RunBatched(model, sources, sc, opt);
  int mismatched = 0;
  for (int b = 0; b < 8; ++b) {
    SessionConfig one = sc;
    one.pad_frame = pads[b];
    mismatched += !(RunSession(model, sources[b], one, b).frames == batched[b].frames);
  }
  const std::vector<int> sizes = {1, 2, 4, 8, 16};
  SessionConfig bench_cfg = sc;
  bench_cfg.cap_extra = 20;
  const auto rows = RunBench(model, sources[0], sizes, bench_cfg);
  const std::string csv = BenchCsv(rows);
  const char* out_path = "acceptance_bench.csv";
  std::ofstream(out_path) << csv;
  std::set<std::pair<int, bool>> seen;
  for (const auto& r : rows) seen.insert({r.batch, r.cfg});
  const bool grid = seen.size() == 10;
  std::string rtf;
  for (const auto& r : rows) rtf += Fmt(" %d%s:%.3f", r.batch, r.cfg ? "c" : "", r.rtf);
  return {mismatched == 0 && grid,
          Fmt("batch 8 greedy: %d/8 sequences differ; bench rows %zu -> %s; rtf%s", mismatched, rows.size(), out_path,
              rtf.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "delay round trip", DelayRoundTrip},
      {2, "rvq encode equals brute force", RvqOracle},
      {3, "ema codec training halves error", CodecTraining},
      {4, "contextual alignment recovery", AlignmentRecovery},
      {5, "spike smoothing cap and idempotence", SpikeSmoothing},
      {6, "silence insertion causality", SilenceCausality},
      {7, "padding penalty schedule", PaddingSchedule},
      {8, "guidance arithmetic", CfgArithmetic},
      {9, "gradient check", GradientCheck},
      {10, "causality under source mutation", CausalityMutation},
      {11, "end-to-end synthetic translation", EndToEnd},
      {12, "lag regime ablation ordering", AblationOrdering},
      {13, "latency metric fixtures", LatencyFixtures},
      {14, "bleu fixture", BleuFixture},
      {15, "batched equivalence and bench", BatchedEquivalence},
  };
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  int failed = 0;
  std::ofstream results("acceptance_results.txt");
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string line = Fmt("%s %2d %s: ", o.pass ? "PASS" : "FAIL", c.id, c.name) + o.detail + Fmt(" (%.1f s)", s);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    results << line << '\n' << std::flush;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
