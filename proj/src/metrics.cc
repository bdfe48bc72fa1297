#include "simtrans/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace simtrans {

std::string NormalizeText(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> TokenizeForBleu(std::string_view text) {
  std::istringstream is(NormalizeText(text));
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

namespace {

std::map<std::vector<std::string>, int> NgramCounts(std::span<const std::string> words, int n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
  }
  return counts;
}

}  // namespace

BleuStats ComputeBleuStats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = static_cast<double>(hyp.size());
  s.ref_len = static_cast<double>(ref.size());
  for (int n = 1; n <= kBleuMaxOrder; ++n) {
    const auto h = NgramCounts(hyp, n);
    const auto r = NgramCounts(ref, n);
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
    s.totals[n - 1] = std::max<double>(0, static_cast<double>(hyp.size()) - n + 1);
  }
  return s;
}

double BleuFromStats(const BleuStats& s, bool effective_order) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0;
  int order = kBleuMaxOrder;
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    if (s.totals[n] == 0) {
      if (!effective_order) return 0.0;
      order = n;
      break;
    }
    if (s.matches[n] == 0) return 0.0;
    log_sum += std::log(s.matches[n] / s.totals[n]);
  }
  if (order == 0) return 0.0;
  const double bp = s.hyp_len < s.ref_len ? std::exp(1.0 - s.ref_len / s.hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / order);
}

double SentenceBleu(std::string_view hyp, std::string_view ref) {
  const auto r = TokenizeForBleu(ref);
  if (r.empty()) throw std::invalid_argument("empty reference");
  return BleuFromStats(ComputeBleuStats(TokenizeForBleu(hyp), r), true);
}

double CorpusBleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("hypothesis and reference counts differ");
  BleuStats total;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    const auto r = TokenizeForBleu(refs[k]);
    if (r.empty()) throw std::invalid_argument("empty reference");
    total += ComputeBleuStats(TokenizeForBleu(hyps[k]), r);
  }
  return BleuFromStats(total, false);
}

double Laal(const LatencyInputs& in) {
  const auto& d = in.emit_times;
  if (d.empty()) throw std::invalid_argument("no emitted words");
  if (!(in.source_duration > 0)) throw std::invalid_argument("source duration must be positive");
  if (in.n_ref < 1) throw std::invalid_argument("n_ref must be >= 1");
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] < d[i - 1]) throw std::invalid_argument("emission times must be non-decreasing");
  }
  const int n_gen = static_cast<int>(d.size());
  const double delta = in.source_duration / std::max(n_gen, in.n_ref);
  int n_max = n_gen;
  for (int i = 0; i < n_gen; ++i) {
    if (d[i] >= in.source_duration) {
      n_max = i + 1;
      break;
    }
  }
  double sum = 0;
  for (int i = 0; i < n_max; ++i) sum += d[i] - i * delta;
  return sum / n_max;
}

double EndOffset(double source_last_word_end_s, double output_last_word_end_s) {
  return output_last_word_end_s - source_last_word_end_s;
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("embedding sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw std::invalid_argument("zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<ConditionLabel> QuantileLabels(std::span<const double> scores) {
  if (scores.size() < 5) throw std::invalid_argument("quantile labels need at least 5 scores");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<ConditionLabel> labels(scores.size(), ConditionLabel::kNeutral);
  if (sorted.front() == sorted.back()) return labels;
  const auto n = sorted.size();
  std::array<double, 4> bounds;
  for (int k = 1; k <= 4; ++k) {
    const auto rank = static_cast<std::size_t>(std::ceil(k * static_cast<double>(n) / 5.0));
    bounds[k - 1] = sorted[std::max<std::size_t>(rank, 1) - 1];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int bucket = 4;
    for (int k = 0; k < 4; ++k) {
      if (scores[i] <= bounds[k]) {
        bucket = k;
        break;
      }
    }
    labels[i] = static_cast<ConditionLabel>(bucket);
  }
  return labels;
}

std::vector<std::vector<ConditionLabel>> QuantileLabelsPerDataset(std::span<const std::vector<double>> datasets) {
  std::vector<std::vector<ConditionLabel>> out;
  out.reserve(datasets.size());
  for (const auto& d : datasets) out.push_back(QuantileLabels(d));
  return out;
}

}  // namespace simtrans
