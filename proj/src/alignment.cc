#include "simtrans/alignment.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "simtrans/errors.h"

namespace simtrans {

StepScorer::StepScorer(std::vector<int> switch_at, double high, double low)
    : switch_at_(std::move(switch_at)), log_high_(std::log(high)), log_low_(std::log(low)) {}

double StepScorer::Score(std::span<const std::string> source_prefix,
                         std::span<const std::string> target_prefix, const std::string&) const {
  const std::size_t j = target_prefix.size();
  if (j >= switch_at_.size()) throw std::out_of_range("step scorer has no entry for this target word");
  return static_cast<int>(source_prefix.size()) >= switch_at_[j] ? log_high_ : log_low_;
}

WordTableScorer WordTableScorer::Train(std::span<const Words> sources, std::span<const Words> targets,
                                       Options options) {
  if (sources.size() != targets.size()) throw std::invalid_argument("corpus sides differ in length");
  WordTableScorer s;
  s.floor_ = options.floor;
  std::map<std::string, int> src_ids, tgt_ids;
  for (const auto& sent : sources) {
    for (const auto& w : sent) src_ids.emplace(w, 0);
  }
  for (const auto& sent : targets) {
    for (const auto& w : sent) tgt_ids.emplace(w, 0);
  }
  for (auto& [w, id] : src_ids) {
    id = static_cast<int>(s.src_vocab_.size());
    s.src_vocab_.push_back(w);
  }
  for (auto& [w, id] : tgt_ids) {
    id = static_cast<int>(s.tgt_vocab_.size());
    s.tgt_vocab_.push_back(w);
  }
  const auto nt = static_cast<Eigen::Index>(s.tgt_vocab_.size());
  const auto ns = static_cast<Eigen::Index>(s.src_vocab_.size());
  // table(f, e) = t(f | e), columns sum to one.
  s.prior_.assign(static_cast<std::size_t>(nt), 0.0);
  double tokens = 0;
  for (const auto& sent : targets) {
    for (const auto& w : sent) s.prior_[tgt_ids.at(w)] += 1;
    tokens += static_cast<double>(sent.size());
  }
  for (double& p : s.prior_) p /= tokens;
  s.table_ = MatrixD::Constant(nt, ns, nt > 0 ? 1.0 / static_cast<double>(nt) : 0.0);
  for (int it = 0; it < options.iterations; ++it) {
    MatrixD counts = MatrixD::Zero(nt, ns);
    for (std::size_t k = 0; k < sources.size(); ++k) {
      for (const auto& f : targets[k]) {
        const int fi = tgt_ids.at(f);
        double z = 0;
        for (const auto& e : sources[k]) z += s.table_(fi, src_ids.at(e));
        if (z <= 0) continue;
        for (const auto& e : sources[k]) {
          const int ei = src_ids.at(e);
          counts(fi, ei) += s.table_(fi, ei) / z;
        }
      }
    }
    for (Eigen::Index e = 0; e < ns; ++e) {
      const double total = counts.col(e).sum();
      if (total > 0) s.table_.col(e) = counts.col(e) / total;
    }
  }
  return s;
}

int WordTableScorer::SourceId(const std::string& w) const {
  auto it = std::lower_bound(src_vocab_.begin(), src_vocab_.end(), w);
  return it != src_vocab_.end() && *it == w ? static_cast<int>(it - src_vocab_.begin()) : -1;
}

int WordTableScorer::TargetId(const std::string& w) const {
  auto it = std::lower_bound(tgt_vocab_.begin(), tgt_vocab_.end(), w);
  return it != tgt_vocab_.end() && *it == w ? static_cast<int>(it - tgt_vocab_.begin()) : -1;
}

double WordTableScorer::Probability(const std::string& target_word, const std::string& source_word) const {
  const int f = TargetId(target_word);
  const int e = SourceId(source_word);
  return f < 0 || e < 0 ? 0.0 : table_(f, e);
}

double WordTableScorer::Score(std::span<const std::string> source_prefix, std::span<const std::string>,
                              const std::string& target_word) const {
  // The target word's corpus frequency stands in for an empty source prefix,
  // so a weak translation of the first source word is not a jump.
  const int f = TargetId(target_word);
  double best = f < 0 ? 0.0 : prior_[f];
  for (const auto& e : source_prefix) best = std::max(best, Probability(target_word, e));
  return std::log(floor_ + best);
}

double CachedScorer::Score(std::span<const std::string> source_prefix,
                           std::span<const std::string> target_prefix, const std::string& target_word) const {
  std::string key;
  for (const auto& w : source_prefix) key.append(w).push_back('\x1f');
  key.push_back('\x1e');
  for (const auto& w : target_prefix) key.append(w).push_back('\x1f');
  key.push_back('\x1e');
  key.append(target_word);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double v = inner_.Score(source_prefix, target_prefix, target_word);
  std::lock_guard<std::mutex> lock(mu_);
  ++misses_;
  cache_.emplace(std::move(key), v);
  return v;
}

LoglikTable LoglikMatrix(const Scorer& scorer, std::span<const std::string> source,
                         std::span<const std::string> target, LoglikOptions options) {
  const int n = static_cast<int>(source.size());
  const int m = static_cast<int>(target.size());
  if (n < 1 || m < 1) throw std::invalid_argument("alignment needs at least one word on each side");
  LoglikTable table;
  table.values.resize(m, n + 1);
  auto row = [&](int j) {
    for (int i = 0; i <= n; ++i) {
      double v;
      try {
        v = scorer.Score(source.first(i), target.first(j), target[j]);
      } catch (const std::exception& e) {
        throw std::runtime_error("scorer failed at (j=" + std::to_string(j + 1) + ", i=" + std::to_string(i) +
                                 "): " + e.what());
      }
      if (!std::isfinite(v)) {
        throw std::runtime_error("scorer returned a non-finite value at (j=" + std::to_string(j + 1) +
                                 ", i=" + std::to_string(i) + ")");
      }
      table.values(j, i) = v;
    }
  };
  const int threads = scorer.concurrent_safe() ? std::clamp(options.threads, 1, m) : 1;
  if (threads == 1) {
    for (int j = 0; j < m; ++j) row(j);
    return table;
  }
  std::vector<std::exception_ptr> errors(m);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int j = w; j < m; j += threads) {
        try {
          row(j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return table;
}

AlignmentMap ContextualAlign(const LoglikTable& table) {
  AlignmentMap a(table.m());
  for (int j = 0; j < table.m(); ++j) {
    int best = 1;
    double best_delta = table.values(j, 1) - table.values(j, 0);
    for (int i = 2; i <= table.n(); ++i) {
      const double delta = table.values(j, i) - table.values(j, i - 1);
      if (delta > best_delta) {
        best_delta = delta;
        best = i;
      }
    }
    a[j] = best;
  }
  return a;
}

void WriteAlignment(std::ostream& os, const AlignmentMap& a, const LoglikTable& table) {
  if (static_cast<int>(a.size()) != table.m()) throw std::invalid_argument("alignment and table differ in length");
  for (int j = 0; j < table.m(); ++j) {
    const int i = a[j];
    os << (j + 1) << '\t' << i << '\t' << std::setprecision(17)
       << table.values(j, i) - table.values(j, i - 1) << '\n';
  }
}

void WriteAlignment(std::ostream& os, const AlignmentMap& a) {
  for (std::size_t j = 0; j < a.size(); ++j) os << (j + 1) << '\t' << a[j] << '\n';
}

AlignmentMap ReadAlignment(std::istream& is) {
  AlignmentMap a;
  std::string line;
  int expected = 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int j = 0;
    int i = 0;
    if (!(ls >> j >> i)) throw DataError("bad alignment line: " + line);
    if (j != expected) throw DataError("alignment lines out of order at j=" + std::to_string(j));
    if (i < 1) throw DataError("alignment index must be >= 1");
    a.push_back(i);
    ++expected;
  }
  return a;
}

void WriteLoglikCsv(std::ostream& os, const LoglikTable& table) {
  os << "j";
  for (int i = 0; i <= table.n(); ++i) os << ",i" << i;
  os << '\n' << std::setprecision(10);
  for (int j = 0; j < table.m(); ++j) {
    os << (j + 1);
    for (int i = 0; i <= table.n(); ++i) os << ',' << table.values(j, i);
    os << '\n';
  }
}

}  // namespace simtrans
