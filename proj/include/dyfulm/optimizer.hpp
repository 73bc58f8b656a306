#pragma once

#include <cmath>
#include <vector>

#include "dyfulm/tensor.hpp"

namespace dyfulm {

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm measured before any rescaling.
inline double clip_global_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const Tensor& p : params) {
      if (!p.has_grad()) continue;
      Tensor t = p;
      for (double& g : t.grad()) g *= s;
    }
  }
  return norm;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Tensors without an accumulated gradient are
// treated as zero-gradient and come through every step bit-unchanged.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
      v_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      const bool has = p.has_grad();
      const double* g = has ? p.grad().data() : nullptr;
      double* x = p.data();
      for (size_t j = 0; j < m_[i].size(); ++j) {
        const double gj = has ? g[j] : 0.0;
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * gj;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * gj * gj;
        const double update =
            cfg_.learning_rate * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.epsilon);
        if (update != 0.0) x[j] -= update;
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  long steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace dyfulm
