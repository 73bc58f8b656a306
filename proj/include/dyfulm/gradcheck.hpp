#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dyfulm/ops.hpp"
#include "dyfulm/tape.hpp"
#include "dyfulm/tensor.hpp"

namespace dyfulm {

// Scalarizing weights for checking vector-valued functions: the weighted sum
// of outputs is what gets differentiated both ways. Powers of two, so the
// weighting itself introduces no rounding, and non-uniform, so functions with
// constant output sums (softmax rows) still get a non-degenerate check.
inline Tensor gradcheck_weights(const std::vector<int>& shape) {
  static constexpr double kCycle[5] = {1.0, 2.0, 4.0, 0.25, 0.5};
  Tensor r = Tensor::zeros(shape);
  for (int i = 0; i < r.numel(); ++i) r.data()[i] = kCycle[i % 5];
  return r;
}

// Compares analytic gradients of f against central finite differences at
// every coordinate of every input. Returns the max over coordinates of
//   |analytic − numeric| / max(1, |analytic|, |numeric|).
// Reports only; never throws on a mismatch. f must be deterministic.
inline double gradcheck(const std::function<Tensor(Tape&)>& f, const std::vector<Tensor>& inputs,
                        double step = 1e-6) {
  std::vector<Tensor> ins = inputs;
  for (Tensor& t : ins) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tensor weights;
  {
    Tape tp;
    Tensor y = f(tp);
    weights = gradcheck_weights(y.shape());
    Tensor s = sum_all(tp, mul(tp, y, weights));
    tp.backward(s);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(ins.size());
  for (Tensor& t : ins)
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(static_cast<size_t>(t.numel()), 0.0));

  auto eval = [&]() {
    Tape tp(false, /*grad_enabled=*/false);
    Tensor y = f(tp);
    double acc = 0.0;
    for (int i = 0; i < y.numel(); ++i) acc += y.data()[i] * weights.data()[i];
    return acc;
  };

  double max_err = 0.0;
  for (size_t ti = 0; ti < ins.size(); ++ti) {
    Tensor& t = ins[ti];
    for (int j = 0; j < t.numel(); ++j) {
      const double v = t.data()[j];
      t.data()[j] = v + step;
      const double fp = eval();
      t.data()[j] = v - step;
      const double fm = eval();
      t.data()[j] = v;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[ti][static_cast<size_t>(j)];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace dyfulm
