#pragma once

// Minimal reverse-mode differentiation over row-major Eigen matrices. A Graph
// records one forward pass; Backward() walks it in reverse and accumulates
// parameter gradients into caller-owned matrices.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "simtrans/tensor.h"

namespace simtrans::ag {

struct Var {
  int id = -1;
};

// Row layout for attention: rows sharing a segment id must be contiguous and
// ordered by position. Row i may attend to row j of the same segment when
// pos[j] <= pos[i] and pos[i] - pos[j] < window.
struct AttentionLayout {
  std::vector<int> segment;
  std::vector<int> position;
  int window = std::numeric_limits<int>::max();
};

template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;

  Graph() { nodes_.reserve(512); }

  const Mat& value(Var v) const { return Value(nodes_[v.id]); }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  Scalar scalar(Var v) const { return value(v)(0, 0); }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Leaf referencing caller storage; its gradient is added into grad_sink.
  Var Param(const Mat& value, Mat* grad_sink) {
    Node n;
    n.ref = &value;
    n.sink = grad_sink;
    return Push(std::move(n));
  }

  Var Constant(Mat value) {
    Node n;
    n.own = std::move(value);
    return Push(std::move(n));
  }

  Var MatMul(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.cols() != bv.rows()) throw std::invalid_argument("matmul shape mismatch");
    Node n;
    n.own.noalias() = av * bv;
    n.backward = [a, b](Graph& g, const Mat& dy) {
      if (g.NeedsGrad(a)) g.Accumulate(a).noalias() += dy * g.value(b).transpose();
      if (g.NeedsGrad(b)) g.Accumulate(b).noalias() += g.value(a).transpose() * dy;
    };
    return Push(std::move(n), {a, b});
  }

  Var Add(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw std::invalid_argument("add shape mismatch");
    }
    Node n;
    n.own = value(a) + value(b);
    n.backward = [a, b](Graph& g, const Mat& dy) {
      if (g.NeedsGrad(a)) g.Accumulate(a) += dy;
      if (g.NeedsGrad(b)) g.Accumulate(b) += dy;
    };
    return Push(std::move(n), {a, b});
  }

  Var AddN(std::span<const Var> terms) {
    if (terms.empty()) throw std::invalid_argument("empty sum");
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = Add(acc, terms[i]);
    return acc;
  }

  Var Scale(Var a, Scalar s) {
    Node n;
    n.own = value(a) * s;
    n.backward = [a, s](Graph& g, const Mat& dy) {
      if (g.NeedsGrad(a)) g.Accumulate(a) += dy * s;
    };
    return Push(std::move(n), {a});
  }

  // out.row(r) = table.row(ids[r]).
  Var Gather(Var table, std::vector<int> ids) {
    const Mat& tv = value(table);
    Node n;
    n.own.resize(static_cast<Eigen::Index>(ids.size()), tv.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= tv.rows()) throw std::out_of_range("gather index out of range");
      n.own.row(static_cast<Eigen::Index>(r)) = tv.row(ids[r]);
    }
    n.backward = [table, ids = std::move(ids)](Graph& g, const Mat& dy) {
      if (!g.NeedsGrad(table)) return;
      Mat& dt = g.Accumulate(table);
      for (std::size_t r = 0; r < ids.size(); ++r) dt.row(ids[r]) += dy.row(static_cast<Eigen::Index>(r));
    };
    return Push(std::move(n), {table});
  }

  // out.row(rows[k][i]) = parts[k].row(i); every output row written exactly once.
  Var Assemble(std::vector<Var> parts, std::vector<std::vector<int>> rows, int total_rows) {
    if (parts.empty() || parts.size() != rows.size()) throw std::invalid_argument("bad assemble");
    Node n;
    n.own = Mat::Zero(total_rows, value(parts[0]).cols());
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Mat& pv = value(parts[k]);
      if (pv.rows() != static_cast<Eigen::Index>(rows[k].size())) throw std::invalid_argument("bad assemble rows");
      for (std::size_t i = 0; i < rows[k].size(); ++i) n.own.row(rows[k][i]) = pv.row(static_cast<Eigen::Index>(i));
    }
    std::vector<Var> inputs = parts;
    n.backward = [parts = std::move(parts), rows = std::move(rows)](Graph& g, const Mat& dy) {
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!g.NeedsGrad(parts[k])) continue;
        Mat& dp = g.Accumulate(parts[k]);
        for (std::size_t i = 0; i < rows[k].size(); ++i) dp.row(static_cast<Eigen::Index>(i)) += dy.row(rows[k][i]);
      }
    };
    return Push(std::move(n), inputs);
  }

  // Row-wise x / rms(x) * gain, gain is 1 x C.
  Var RmsNorm(Var x, Var gain, Scalar eps = Scalar(1e-6)) {
    const Mat& xv = value(x);
    const Mat& gv = value(gain);
    const Eigen::Index rows = xv.rows();
    const Eigen::Index cols = xv.cols();
    Vector<Scalar> inv_rms(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      inv_rms(r) = Scalar(1) / std::sqrt(xv.row(r).squaredNorm() / Scalar(cols) + eps);
    }
    Node n;
    n.own = (inv_rms.asDiagonal() * xv).array().rowwise() * gv.row(0).array();
    n.backward = [x, gain, inv_rms](Graph& g, const Mat& dy) {
      const Mat& xv = g.value(x);
      const Mat& gv = g.value(gain);
      const Scalar cols = Scalar(xv.cols());
      const Mat xhat = inv_rms.asDiagonal() * xv;
      if (g.NeedsGrad(gain)) {
        g.Accumulate(gain) += (dy.array() * xhat.array()).colwise().sum().matrix();
      }
      if (g.NeedsGrad(x)) {
        const Mat dxhat = dy.array().rowwise() * gv.row(0).array();
        const Vector<Scalar> proj = (dxhat.array() * xhat.array()).rowwise().sum().matrix() / cols;
        Mat dx = dxhat - proj.asDiagonal() * xhat;
        g.Accumulate(x) += inv_rms.asDiagonal() * dx;
      }
    };
    return Push(std::move(n), {x, gain});
  }

  // silu(a) * b
  Var SiluGate(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    const Mat sig = (Scalar(1) + (-av.array()).exp()).inverse().matrix();
    Node n;
    n.own = (av.array() * sig.array() * bv.array()).matrix();
    n.backward = [a, b, sig](Graph& g, const Mat& dy) {
      const auto& av = g.value(a).array();
      if (g.NeedsGrad(a)) {
        const auto dsilu = sig.array() * (Scalar(1) + av * (Scalar(1) - sig.array()));
        g.Accumulate(a) += (dy.array() * g.value(b).array() * dsilu).matrix();
      }
      if (g.NeedsGrad(b)) g.Accumulate(b) += (dy.array() * av * sig.array()).matrix();
    };
    return Push(std::move(n), {a, b});
  }

  // Rotary position embedding on each head's consecutive (even, odd) pairs.
  Var Rope(Var x, std::vector<int> positions, int num_heads, double base) {
    const Mat& xv = value(x);
    const int head_dim = static_cast<int>(xv.cols()) / num_heads;
    Node n;
    n.own = xv;
    RotateRows(n.own, positions, num_heads, head_dim, base, +1);
    n.backward = [x, positions = std::move(positions), num_heads, head_dim, base](Graph& g, const Mat& dy) {
      if (!g.NeedsGrad(x)) return;
      Mat dx = dy;
      RotateRows(dx, positions, num_heads, head_dim, base, -1);
      g.Accumulate(x) += dx;
    };
    return Push(std::move(n), {x});
  }

  static void RotateRows(Mat& m, std::span<const int> positions, int num_heads, int head_dim,
                         double base, int sign) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (int i = 0; i < head_dim / 2; ++i) {
        const double angle = sign * positions[r] * std::pow(base, -2.0 * i / head_dim);
        const Scalar c = static_cast<Scalar>(std::cos(angle));
        const Scalar s = static_cast<Scalar>(std::sin(angle));
        for (int h = 0; h < num_heads; ++h) {
          const int k = h * head_dim + 2 * i;
          const Scalar x0 = m(r, k);
          const Scalar x1 = m(r, k + 1);
          m(r, k) = x0 * c - x1 * s;
          m(r, k + 1) = x0 * s + x1 * c;
        }
      }
    }
  }

  // Multi-head scaled dot-product attention under `layout`.
  Var Attention(Var q, Var k, Var v, int num_heads, const AttentionLayout& layout) {
    const Mat& qv = value(q);
    const Mat& kv = value(k);
    const Mat& vv = value(v);
    const Eigen::Index rows = qv.rows();
    const int head_dim = static_cast<int>(qv.cols()) / num_heads;
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_dim));
    const auto blocks = Blocks(layout, rows);

    // probs[block * num_heads + head]
    std::vector<Mat> probs;
    probs.reserve(blocks.size() * num_heads);
    Node n;
    n.own = Mat::Zero(rows, qv.cols());
    for (const auto& [start, len] : blocks) {
      for (int h = 0; h < num_heads; ++h) {
        const auto qb = qv.block(start, h * head_dim, len, head_dim);
        const auto kb = kv.block(start, h * head_dim, len, head_dim);
        Mat p = (qb * kb.transpose()) * scale;
        for (int i = 0; i < len; ++i) {
          Scalar mx = -std::numeric_limits<Scalar>::infinity();
          for (int j = 0; j < len; ++j) {
            if (!Allowed(layout, start + i, start + j)) {
              p(i, j) = -std::numeric_limits<Scalar>::infinity();
            } else {
              mx = std::max(mx, p(i, j));
            }
          }
          Scalar sum = 0;
          for (int j = 0; j < len; ++j) {
            const Scalar e = std::isinf(p(i, j)) ? Scalar(0) : std::exp(p(i, j) - mx);
            p(i, j) = e;
            sum += e;
          }
          p.row(i) /= sum;
        }
        n.own.block(start, h * head_dim, len, head_dim).noalias() =
            p * vv.block(start, h * head_dim, len, head_dim);
        probs.push_back(std::move(p));
      }
    }
    n.backward = [q, k, v, num_heads, head_dim, scale, blocks, probs = std::move(probs)](Graph& g, const Mat& dy) {
      const Mat& qv = g.value(q);
      const Mat& kv = g.value(k);
      const Mat& vv = g.value(v);
      Mat* dq = g.NeedsGrad(q) ? &g.Accumulate(q) : nullptr;
      Mat* dk = g.NeedsGrad(k) ? &g.Accumulate(k) : nullptr;
      Mat* dv = g.NeedsGrad(v) ? &g.Accumulate(v) : nullptr;
      std::size_t idx = 0;
      for (const auto& [start, len] : blocks) {
        for (int h = 0; h < num_heads; ++h, ++idx) {
          const Mat& p = probs[idx];
          const auto dyb = dy.block(start, h * head_dim, len, head_dim);
          if (dv) dv->block(start, h * head_dim, len, head_dim).noalias() += p.transpose() * dyb;
          const Mat dp = dyb * vv.block(start, h * head_dim, len, head_dim).transpose();
          const Vector<Scalar> rowdot = (dp.array() * p.array()).rowwise().sum().matrix();
          const Mat ds = (p.array() * (dp.colwise() - rowdot).array()).matrix() * scale;
          if (dq) dq->block(start, h * head_dim, len, head_dim).noalias() += ds * kv.block(start, h * head_dim, len, head_dim);
          if (dk) dk->block(start, h * head_dim, len, head_dim).noalias() += ds.transpose() * qv.block(start, h * head_dim, len, head_dim);
        }
      }
    };
    return Push(std::move(n), {q, k, v});
  }

  // Sum over rows with target >= 0 of -log softmax(logits)[target]. 1 x 1.
  Var CrossEntropySum(Var logits, std::vector<int> targets) {
    const Mat& lv = value(logits);
    if (lv.rows() != static_cast<Eigen::Index>(targets.size())) throw std::invalid_argument("target count mismatch");
    Mat probs(lv.rows(), lv.cols());
    Scalar total = 0;
    for (Eigen::Index r = 0; r < lv.rows(); ++r) {
      const Scalar mx = lv.row(r).maxCoeff();
      probs.row(r) = (lv.row(r).array() - mx).exp().matrix();
      const Scalar sum = probs.row(r).sum();
      probs.row(r) /= sum;
      const int t = targets[r];
      if (t < 0) continue;
      if (t >= lv.cols()) throw std::out_of_range("target id out of range");
      total += -(lv(r, t) - mx - std::log(sum));
    }
    Node n;
    n.own = Mat::Constant(1, 1, total);
    n.backward = [logits, targets = std::move(targets), probs = std::move(probs)](Graph& g, const Mat& dy) {
      if (!g.NeedsGrad(logits)) return;
      Mat& dl = g.Accumulate(logits);
      const Scalar s = dy(0, 0);
      for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const int t = targets[r];
        if (t < 0) continue;
        dl.row(r) += probs.row(r) * s;
        dl(r, t) -= s;
      }
    };
    return Push(std::move(n), {logits});
  }

  // Seeds d(root) = 1 and propagates to every parameter sink.
  void Backward(Var root) {
    Node& r = nodes_[root.id];
    r.grad = Mat::Ones(Value(r).rows(), Value(r).cols());
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink != nullptr) {
        if (n.sink->size() == 0) *n.sink = Mat::Zero(n.grad.rows(), n.grad.cols());
        *n.sink += n.grad;
      }
    }
  }

 private:
  struct Node {
    Mat own;
    const Mat* ref = nullptr;
    Mat* sink = nullptr;
    bool requires_grad = false;
    Mat grad;
    std::function<void(Graph&, const Mat&)> backward;
  };

  static const Mat& Value(const Node& n) { return n.ref != nullptr ? *n.ref : n.own; }

  Var Push(Node n, const std::vector<Var>& inputs = {}) {
    if (n.sink != nullptr) n.requires_grad = true;
    for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    if (!n.requires_grad) n.backward = nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool NeedsGrad(Var v) const { return nodes_[v.id].requires_grad; }

  Mat& Accumulate(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(Value(n).rows(), Value(n).cols());
    return n.grad;
  }

  static bool Allowed(const AttentionLayout& layout, Eigen::Index i, Eigen::Index j) {
    const int pi = layout.position[i];
    const int pj = layout.position[j];
    return pj <= pi && pi - pj < layout.window;
  }

  static std::vector<std::pair<int, int>> Blocks(const AttentionLayout& layout, Eigen::Index rows) {
    if (static_cast<Eigen::Index>(layout.segment.size()) != rows ||
        static_cast<Eigen::Index>(layout.position.size()) != rows) {
      throw std::invalid_argument("attention layout size mismatch");
    }
    std::vector<std::pair<int, int>> blocks;
    int start = 0;
    for (int i = 1; i <= rows; ++i) {
      if (i == rows || layout.segment[i] != layout.segment[start]) {
        blocks.emplace_back(start, i - start);
        start = i;
      }
    }
    return blocks;
  }

  std::vector<Node> nodes_;
};

}  // namespace simtrans::ag
