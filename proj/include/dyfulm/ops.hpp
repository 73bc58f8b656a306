#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyfulm/tape.hpp"
#include "dyfulm/tensor.hpp"

// Differentiable operations over the tape. Every op computes its forward
// result eagerly and records one closure implementing the exact adjoint.
// Binary elementwise ops accept identical shapes or a trailing-1 broadcast
// (same rank, one operand ending in singleton axes); nothing richer.

namespace dyfulm {

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// at most one side broadcasts; `tail` is the flattened size of the
// broadcast suffix, so the small operand's index is out_index / tail
struct BroadcastPlan {
  bool a_small = false;
  bool b_small = false;
  int tail = 1;
};

inline BroadcastPlan broadcast_plan(const Tensor& a, const Tensor& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return {};
  const std::string err = std::string(op) + ": shapes " + shape_str(sa) + " and " + shape_str(sb) +
                          " are neither equal nor trailing-1 broadcastable";
  require(sa.size() == sb.size(), err);
  const int r = static_cast<int>(sa.size());
  auto try_small = [&](const std::vector<int>& small, const std::vector<int>& big) -> int {
    int t = 0;
    while (t < r && small[static_cast<size_t>(r - 1 - t)] == 1) ++t;
    if (t == 0) return -1;
    int tail = 1;
    for (int j = r - t; j < r; ++j) tail *= big[static_cast<size_t>(j)];
    for (int j = 0; j < r - t; ++j)
      if (small[static_cast<size_t>(j)] != big[static_cast<size_t>(j)]) return -1;
    return tail;
  };
  BroadcastPlan p;
  if (int tail = try_small(sb, sa); tail > 0) {
    p.b_small = true;
    p.tail = tail;
    return p;
  }
  if (int tail = try_small(sa, sb); tail > 0) {
    p.a_small = true;
    p.tail = tail;
    return p;
  }
  throw std::invalid_argument(err);
}

inline double stable_sigmoid(double x) {
  // branch form keeps exp() argument non-positive on both sides
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matrix ops

// C = A·B with dA = dC·Bᵀ and dB = Aᵀ·dC
inline Tensor matmul(Tape& tp, const Tensor& a, const Tensor& b) {
  detail::require(a.rank() == 2 && b.rank() == 2,
                  "matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  detail::require(k == k2, "matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (int i = 0; i < m; ++i) {
      const double* ai = pa + static_cast<size_t>(i) * k;
      double* ci = pc + static_cast<size_t>(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        const double av = ai[kk];
        const double* bk = pb + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
      }
    }
  }
  tp.check(out, "matmul");
  if (out.requires_grad())
    tp.record([&tp, a, b, out, m, k, n]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      const double* pg = go->data();
      if (a.requires_grad()) {
        auto& ga = tp.bg(a);
        const double* pb = b.data();
        for (int i = 0; i < m; ++i) {
          const double* gi = pg + static_cast<size_t>(i) * n;
          double* gai = ga.data() + static_cast<size_t>(i) * k;
          for (int kk = 0; kk < k; ++kk) {
            const double* bk = pb + static_cast<size_t>(kk) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += gi[j] * bk[j];
            gai[kk] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto& gb = tp.bg(b);
        const double* pa = a.data();
        for (int i = 0; i < m; ++i) {
          const double* ai = pa + static_cast<size_t>(i) * k;
          const double* gi = pg + static_cast<size_t>(i) * n;
          for (int kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            double* gbk = gb.data() + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) gbk[j] += av * gi[j];
          }
        }
      }
    });
  return out;
}

inline Tensor transpose(Tape& tp, const Tensor& a) {
  detail::require(a.rank() == 2, "transpose: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({n, m}, a.requires_grad());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data()[static_cast<size_t>(j) * m + i] = a.data()[static_cast<size_t>(i) * n + j];
  tp.check(out, "transpose");
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += (*go)[static_cast<size_t>(j) * m + i];
    });
  return out;
}

// same elements, new shape; row-major layout so the copy is flat
inline Tensor reshape(Tape& tp, const Tensor& a, std::vector<int> new_shape) {
  detail::require(shape_numel(new_shape) == a.numel(),
                  "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  Tensor out = Tensor::zeros(std::move(new_shape), a.requires_grad());
  std::copy(a.data(), a.data() + a.numel(), out.data());
  tp.check(out, "reshape");
  if (out.requires_grad())
    tp.record([&tp, a, out]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
    });
  return out;
}

// ---------------------------------------------------------------------------
// elementwise ops

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_ew(Tape& tp, const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  const BroadcastPlan plan = broadcast_plan(a, b, name);
  const Tensor& big = plan.b_small ? a : b;
  Tensor out = Tensor::zeros(big.shape(), a.requires_grad() || b.requires_grad());
  const int n = out.numel();
  const int tail = plan.tail;
  const bool as = plan.a_small, bs = plan.b_small;
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i)
      po[i] = fwd(pa[as ? i / tail : i], pb[bs ? i / tail : i]);
  }
  tp.check(out, name);
  if (out.requires_grad())
    tp.record([&tp, a, b, out, n, tail, as, bs, bwd]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      const double* pa = a.data();
      const double* pb = b.data();
      const bool need_a = a.requires_grad();
      const bool need_b = b.requires_grad();
      double* ga = need_a ? tp.bg(a).data() : nullptr;
      double* gb = need_b ? tp.bg(b).data() : nullptr;
      for (int i = 0; i < n; ++i) {
        const int ia = as ? i / tail : i;
        const int ib = bs ? i / tail : i;
        double da, db;
        bwd(pa[ia], pb[ib], &da, &db);
        if (need_a) ga[ia] += (*go)[static_cast<size_t>(i)] * da;
        if (need_b) gb[ib] += (*go)[static_cast<size_t>(i)] * db;
      }
    });
  return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_ew(Tape& tp, const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  const int n = out.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);
  tp.check(out, name);
  if (out.requires_grad())
    tp.record([&tp, a, out, n, bwd]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * bwd(a.data()[i], out.data()[i]);
    });
  return out;
}

}  // namespace detail

inline Tensor add(Tape& tp, const Tensor& a, const Tensor& b) {
  return detail::binary_ew(
      tp, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double* da, double* db) { *da = 1.0; *db = 1.0; });
}

inline Tensor sub(Tape& tp, const Tensor& a, const Tensor& b) {
  return detail::binary_ew(
      tp, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double* da, double* db) { *da = 1.0; *db = -1.0; });
}

inline Tensor mul(Tape& tp, const Tensor& a, const Tensor& b) {
  return detail::binary_ew(
      tp, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double* da, double* db) { *da = y; *db = x; });
}

inline Tensor sigmoid(Tape& tp, const Tensor& a) {
  return detail::unary_ew(
      tp, a, "sigmoid", [](double x) { return detail::stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(Tape& tp, const Tensor& a) {
  return detail::unary_ew(
      tp, a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(Tape& tp, const Tensor& a) {
  return detail::unary_ew(
      tp, a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

inline Tensor log(Tape& tp, const Tensor& a) {
  for (int i = 0; i < a.numel(); ++i)
    if (!(a.data()[i] > 0.0))
      throw std::domain_error("log: input must be strictly positive, got " +
                              std::to_string(a.data()[i]));
  return detail::unary_ew(
      tp, a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

inline Tensor relu(Tape& tp, const Tensor& a) {
  return detail::unary_ew(
      tp, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor scale(Tape& tp, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  for (int i = 0; i < a.numel(); ++i) out.data()[i] = c * a.data()[i];
  tp.check(out, "scale");
  if (out.requires_grad())
    tp.record([&tp, a, out, c]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += c * (*go)[i];
    });
  return out;
}

// spec-style dispatch over the elementwise family
enum class EwKind { add, sub, mul, sigmoid, tanh, exp, log, relu };

inline Tensor elementwise(Tape& tp, EwKind kind, const Tensor& a, const Tensor* b = nullptr) {
  const bool binary = kind == EwKind::add || kind == EwKind::sub || kind == EwKind::mul;
  detail::require(binary == (b != nullptr),
                  binary ? "elementwise: binary op requires a second operand"
                         : "elementwise: unary op takes a single operand");
  switch (kind) {
    case EwKind::add: return add(tp, a, *b);
    case EwKind::sub: return sub(tp, a, *b);
    case EwKind::mul: return mul(tp, a, *b);
    case EwKind::sigmoid: return sigmoid(tp, a);
    case EwKind::tanh: return tanh(tp, a);
    case EwKind::exp: return exp(tp, a);
    case EwKind::log: return log(tp, a);
    case EwKind::relu: return relu(tp, a);
  }
  throw std::logic_error("elementwise: unknown kind");
}

// ---------------------------------------------------------------------------
// softmax over the last axis, max-subtracted for stability

inline Tensor softmax(Tape& tp, const Tensor& a) {
  detail::require(a.rank() >= 1, "softmax: needs at least rank 1");
  const int n = a.dim(a.rank() - 1);
  const int rows = a.numel() / n;
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  for (int r = 0; r < rows; ++r) {
    const double* x = a.data() + static_cast<size_t>(r) * n;
    double* y = out.data() + static_cast<size_t>(r) * n;
    double m = x[0];
    for (int j = 1; j < n; ++j) m = std::max(m, x[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - m);
      s += y[j];
    }
    for (int j = 0; j < n; ++j) y[j] /= s;
  }
  tp.check(out, "softmax");
  if (out.requires_grad())
    tp.record([&tp, a, out, n, rows]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int r = 0; r < rows; ++r) {
        const double* y = out.data() + static_cast<size_t>(r) * n;
        const double* g = go->data() + static_cast<size_t>(r) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * y[j];
        double* gx = ga.data() + static_cast<size_t>(r) * n;
        for (int j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
      }
    });
  return out;
}

// ---------------------------------------------------------------------------
// reductions; the reduced axis is removed (a rank-1 input yields shape [1])

enum class ReduceKind { mean, sum };

inline Tensor reduce(Tape& tp, ReduceKind kind, const Tensor& a, int axis) {
  detail::require(axis >= 0 && axis < a.rank(),
                  "reduce: axis " + std::to_string(axis) + " out of range for " + shape_str(a.shape()));
  const auto& s = a.shape();
  int outer = 1, inner = 1;
  for (int j = 0; j < axis; ++j) outer *= s[static_cast<size_t>(j)];
  for (int j = axis + 1; j < a.rank(); ++j) inner *= s[static_cast<size_t>(j)];
  const int n = s[static_cast<size_t>(axis)];
  std::vector<int> out_shape;
  for (int j = 0; j < a.rank(); ++j)
    if (j != axis) out_shape.push_back(s[static_cast<size_t>(j)]);
  if (out_shape.empty()) out_shape.push_back(1);
  const double w = kind == ReduceKind::mean ? 1.0 / n : 1.0;

  Tensor out = Tensor::zeros(out_shape, a.requires_grad());
  for (int o = 0; o < outer; ++o)
    for (int k = 0; k < n; ++k) {
      const double* src = a.data() + (static_cast<size_t>(o) * n + k) * inner;
      double* dst = out.data() + static_cast<size_t>(o) * inner;
      for (int i = 0; i < inner; ++i) dst[i] += src[i];
    }
  if (kind == ReduceKind::mean)
    for (int i = 0; i < out.numel(); ++i) out.data()[i] *= w;
  tp.check(out, "reduce");
  if (out.requires_grad())
    tp.record([&tp, a, out, outer, n, inner, w]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int o = 0; o < outer; ++o)
        for (int k = 0; k < n; ++k) {
          double* dst = ga.data() + (static_cast<size_t>(o) * n + k) * inner;
          const double* src = go->data() + static_cast<size_t>(o) * inner;
          for (int i = 0; i < inner; ++i) dst[i] += w * src[i];
        }
    });
  return out;
}

inline Tensor reduce_sum(Tape& tp, const Tensor& a, int axis) { return reduce(tp, ReduceKind::sum, a, axis); }
inline Tensor reduce_mean(Tape& tp, const Tensor& a, int axis) { return reduce(tp, ReduceKind::mean, a, axis); }

inline Tensor sum_all(Tape& tp, const Tensor& a) {
  Tensor out = Tensor::zeros({1}, a.requires_grad());
  double acc = 0.0;
  for (int i = 0; i < a.numel(); ++i) acc += a.data()[i];
  out.data()[0] = acc;
  tp.check(out, "sum_all");
  if (out.requires_grad())
    tp.record([&tp, a, out]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      const double g = (*go)[0];
      for (double& v : ga) v += g;
    });
  return out;
}

// ---------------------------------------------------------------------------
// structural ops

inline Tensor concat(Tape& tp, const std::vector<Tensor>& parts, int axis) {
  detail::require(!parts.empty(), "concat: no inputs");
  const int r = parts[0].rank();
  detail::require((r == 1 && axis == 0) || (r == 2 && (axis == 0 || axis == 1)),
                  "concat: supported on rank-1 (axis 0) and rank-2 (axis 0/1) tensors");
  bool rg = false;
  int total = 0;
  for (const Tensor& p : parts) {
    detail::require(p.rank() == r, "concat: rank mismatch");
    for (int j = 0; j < r; ++j)
      detail::require(j == axis || p.dim(j) == parts[0].dim(j),
                      "concat: off-axis dimension mismatch: " + shape_str(p.shape()) + " vs " +
                          shape_str(parts[0].shape()));
    total += p.dim(axis);
    rg = rg || p.requires_grad();
  }
  std::vector<int> out_shape = parts[0].shape();
  out_shape[static_cast<size_t>(axis)] = total;
  Tensor out = Tensor::zeros(out_shape, rg);

  if (r == 1 || axis == 0) {
    // contiguous blocks
    size_t off = 0;
    for (const Tensor& p : parts) {
      std::copy(p.data(), p.data() + p.numel(), out.data() + off);
      off += static_cast<size_t>(p.numel());
    }
  } else {
    const int rows = parts[0].dim(0);
    for (int i = 0; i < rows; ++i) {
      size_t off = static_cast<size_t>(i) * total;
      for (const Tensor& p : parts) {
        const int c = p.dim(1);
        std::copy(p.data() + static_cast<size_t>(i) * c, p.data() + static_cast<size_t>(i + 1) * c,
                  out.data() + off);
        off += static_cast<size_t>(c);
      }
    }
  }
  tp.check(out, "concat");
  if (out.requires_grad())
    tp.record([&tp, parts, out, r, axis, total]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      if (r == 1 || axis == 0) {
        size_t off = 0;
        for (const Tensor& p : parts) {
          if (p.requires_grad()) {
            auto& gp = tp.bg(p);
            for (int i = 0; i < p.numel(); ++i) gp[static_cast<size_t>(i)] += (*go)[off + i];
          }
          off += static_cast<size_t>(p.numel());
        }
      } else {
        const int rows = parts[0].dim(0);
        for (int i = 0; i < rows; ++i) {
          size_t off = static_cast<size_t>(i) * total;
          for (const Tensor& p : parts) {
            const int c = p.dim(1);
            if (p.requires_grad()) {
              auto& gp = tp.bg(p);
              for (int j = 0; j < c; ++j) gp[static_cast<size_t>(i) * c + j] += (*go)[off + j];
            }
            off += static_cast<size_t>(c);
          }
        }
      }
    });
  return out;
}

inline Tensor take_column(Tape& tp, const Tensor& a, int col) {
  detail::require(a.rank() == 2, "take_column: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  detail::require(col >= 0 && col < n, "take_column: column " + std::to_string(col) + " out of range");
  Tensor out = Tensor::zeros({m, 1}, a.requires_grad());
  for (int i = 0; i < m; ++i) out.data()[i] = a.data()[static_cast<size_t>(i) * n + col];
  tp.check(out, "take_column");
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n, col]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int i = 0; i < m; ++i) ga[static_cast<size_t>(i) * n + col] += (*go)[static_cast<size_t>(i)];
    });
  return out;
}

inline Tensor take_row(Tape& tp, const Tensor& a, int row) {
  detail::require(a.rank() == 2, "take_row: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  detail::require(row >= 0 && row < m, "take_row: row " + std::to_string(row) + " out of range");
  Tensor out = Tensor::zeros({1, n}, a.requires_grad());
  std::copy(a.data() + static_cast<size_t>(row) * n, a.data() + static_cast<size_t>(row + 1) * n, out.data());
  tp.check(out, "take_row");
  if (out.requires_grad())
    tp.record([&tp, a, out, n, row]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& ga = tp.bg(a);
      for (int j = 0; j < n; ++j) ga[static_cast<size_t>(row) * n + j] += (*go)[static_cast<size_t>(j)];
    });
  return out;
}

// gathers table rows by id; duplicate ids accumulate gradient additively
inline Tensor lookup_rows(Tape& tp, const Tensor& table, const std::vector<int>& ids) {
  detail::require(table.rank() == 2, "lookup_rows: table must be rank-2");
  detail::require(!ids.empty(), "lookup_rows: empty id list");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    detail::require(id >= 0 && id < v,
                    "lookup_rows: id " + std::to_string(id) + " out of range [0," + std::to_string(v) + ")");
  const int t = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({t, d}, table.requires_grad());
  for (int i = 0; i < t; ++i)
    std::copy(table.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d,
              table.data() + static_cast<size_t>(ids[static_cast<size_t>(i)] + 1) * d,
              out.data() + static_cast<size_t>(i) * d);
  tp.check(out, "lookup_rows");
  if (out.requires_grad())
    tp.record([&tp, table, out, ids, t, d]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& gt = tp.bg(table);
      for (int i = 0; i < t; ++i) {
        double* dst = gt.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d;
        const double* src = go->data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  return out;
}

// ---------------------------------------------------------------------------
// fused layers

// y = x·Wᵀ + b over the last axis; x may be rank-1 [in] or rank-2 [m×in]
inline Tensor affine(Tape& tp, const Tensor& x, const Tensor& w, const Tensor& b) {
  detail::require(w.rank() == 2 && b.rank() == 1 && b.dim(0) == w.dim(0),
                  "affine: weight/bias shapes inconsistent: " + shape_str(w.shape()) + ", " +
                      shape_str(b.shape()));
  const int out_dim = w.dim(0), in_dim = w.dim(1);
  const bool vec = x.rank() == 1;
  detail::require((vec && x.dim(0) == in_dim) || (x.rank() == 2 && x.dim(1) == in_dim),
                  "affine: input " + shape_str(x.shape()) + " does not end in width " +
                      std::to_string(in_dim));
  const int m = vec ? 1 : x.dim(0);
  Tensor out = Tensor::zeros(vec ? std::vector<int>{out_dim} : std::vector<int>{m, out_dim},
                             x.requires_grad() || w.requires_grad() || b.requires_grad());
  {
    const double* px = x.data();
    double* py = out.data();
    for (int r = 0; r < m; ++r) {
      const double* xr = px + static_cast<size_t>(r) * in_dim;
      double* yr = py + static_cast<size_t>(r) * out_dim;
      for (int o = 0; o < out_dim; ++o) {
        const double* wo = w.data() + static_cast<size_t>(o) * in_dim;
        double acc = b.data()[o];
        for (int i = 0; i < in_dim; ++i) acc += wo[i] * xr[i];
        yr[o] = acc;
      }
    }
  }
  tp.check(out, "affine");
  if (out.requires_grad())
    tp.record([&tp, x, w, b, out, m, in_dim, out_dim]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      const bool need_x = x.requires_grad(), need_w = w.requires_grad(), need_b = b.requires_grad();
      double* gx = need_x ? tp.bg(x).data() : nullptr;
      double* gw = need_w ? tp.bg(w).data() : nullptr;
      double* gb = need_b ? tp.bg(b).data() : nullptr;
      for (int r = 0; r < m; ++r) {
        const double* gr = go->data() + static_cast<size_t>(r) * out_dim;
        const double* xr = x.data() + static_cast<size_t>(r) * in_dim;
        double* gxr = need_x ? gx + static_cast<size_t>(r) * in_dim : nullptr;
        for (int o = 0; o < out_dim; ++o) {
          const double g = gr[o];
          if (need_b) gb[o] += g;
          const double* wo = w.data() + static_cast<size_t>(o) * in_dim;
          double* gwo = need_w ? gw + static_cast<size_t>(o) * in_dim : nullptr;
          for (int i = 0; i < in_dim; ++i) {
            if (need_x) gxr[i] += g * wo[i];
            if (need_w) gwo[i] += g * xr[i];
          }
        }
      }
    });
  return out;
}

// per-last-axis standardization then affine: y = gain ⊙ (x−μ)/√(σ²+eps) + shift
inline Tensor layer_norm_op(Tape& tp, const Tensor& x, const Tensor& gain, const Tensor& shift,
                            double eps) {
  const int d = x.dim(x.rank() - 1);
  detail::require(gain.rank() == 1 && gain.dim(0) == d && shift.rank() == 1 && shift.dim(0) == d,
                  "layer_norm: gain/shift must match last axis " + std::to_string(d));
  const int rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad() || gain.requires_grad() || shift.requires_grad());
  // keep normalized values and inverse stddev for the adjoint
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(rows) * d);
  auto inv = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.data() + static_cast<size_t>(r) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv)[static_cast<size_t>(r)] = is;
    double* hr = xhat->data() + static_cast<size_t>(r) * d;
    double* yr = out.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mu) * is;
      yr[j] = gain.data()[j] * hr[j] + shift.data()[j];
    }
  }
  tp.check(out, "layer_norm");
  if (out.requires_grad())
    tp.record([&tp, x, gain, shift, out, rows, d, xhat, inv]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      const bool need_x = x.requires_grad(), need_g = gain.requires_grad(), need_s = shift.requires_grad();
      double* gx = need_x ? tp.bg(x).data() : nullptr;
      double* gg = need_g ? tp.bg(gain).data() : nullptr;
      double* gs = need_s ? tp.bg(shift).data() : nullptr;
      for (int r = 0; r < rows; ++r) {
        const double* gyr = go->data() + static_cast<size_t>(r) * d;
        const double* hr = xhat->data() + static_cast<size_t>(r) * d;
        const double is = (*inv)[static_cast<size_t>(r)];
        double sum_dh = 0.0, sum_dhh = 0.0;
        for (int j = 0; j < d; ++j) {
          const double dh = gyr[j] * gain.data()[j];
          sum_dh += dh;
          sum_dhh += dh * hr[j];
          if (need_g) gg[j] += gyr[j] * hr[j];
          if (need_s) gs[j] += gyr[j];
        }
        if (need_x) {
          const double m1 = sum_dh / d, m2 = sum_dhh / d;
          double* gxr = gx + static_cast<size_t>(r) * d;
          for (int j = 0; j < d; ++j) {
            const double dh = gyr[j] * gain.data()[j];
            gxr[j] += is * (dh - m1 - hr[j] * m2);
          }
        }
      }
    });
  return out;
}

// stable -log softmax(logits)[label]; gradient is softmax(logits) - onehot
inline Tensor softmax_cross_entropy(Tape& tp, const Tensor& logits, int label) {
  detail::require(logits.rank() == 1, "softmax_cross_entropy: expected rank-1 logits");
  const int n = logits.dim(0);
  detail::require(label >= 0 && label < n,
                  "softmax_cross_entropy: label " + std::to_string(label) + " out of range [0," +
                      std::to_string(n) + ")");
  double m = logits.data()[0];
  for (int j = 1; j < n; ++j) m = std::max(m, logits.data()[j]);
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += std::exp(logits.data()[j] - m);
  const double lse = m + std::log(s);
  Tensor out = Tensor::scalar(lse - logits.data()[label]);
  out.set_requires_grad(logits.requires_grad());
  tp.check(out, "softmax_cross_entropy");
  if (out.requires_grad())
    tp.record([&tp, logits, out, n, label, lse]() {
      const auto* go = tp.bg_if_fresh(out);
      if (!go) return;
      auto& gl = tp.bg(logits);
      const double g = (*go)[0];
      for (int j = 0; j < n; ++j) {
        const double p = std::exp(logits.data()[j] - lse);
        gl[static_cast<size_t>(j)] += g * (p - (j == label ? 1.0 : 0.0));
      }
    });
  return out;
}

}  // namespace dyfulm
