#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyfulm/tensor.hpp"

namespace dyfulm {

// Reverse-mode tape. Ops record one backward closure each, in execution
// order; backward() replays them in exact reverse insertion order.
//
// Gradient bookkeeping: during a reverse pass every tensor gets a transient
// buffer (bgrad) that is zeroed on first touch via an epoch stamp. After the
// pass, the transient flows are added into the persistent .grad of every
// requires_grad tensor touched. Running backward twice on the same tape
// therefore doubles persistent gradients exactly, and gradients of tensors
// used in several places accumulate additively.
//
// A tape is single-threaded; independent tapes may live on separate threads.
class Tape {
 public:
  explicit Tape(bool check_finite = false, bool grad_enabled = true)
      : check_finite_(check_finite), grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backprop) {
    if (grad_enabled_) nodes_.push_back(std::move(backprop));
  }

  size_t node_count() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw std::invalid_argument("backward requires a scalar loss, got " +
                                  (loss.defined() ? shape_str(loss.shape()) : std::string("<null>")));
    // pass ids are globally unique so stamps left by other tapes (parameters
    // are shared across batches) can never alias a live pass
    epoch_ = next_pass_id();
    touched_.clear();
    bg(loss)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    for (TensorData* t : touched_) {
      if (!t->requires_grad) continue;
      if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
      for (size_t i = 0; i < t->grad.size(); ++i) t->grad[i] += t->bgrad[i];
    }
  }

  // --- helpers for op implementations ---

  // transient gradient buffer, zero-filled on first touch in this pass
  std::vector<double>& bg(const Tensor& t) {
    TensorData* d = t.impl();
    if (d->epoch != epoch_) {
      d->bgrad.assign(d->data.size(), 0.0);
      d->epoch = epoch_;
      touched_.push_back(d);
    }
    return d->bgrad;
  }

  // null when no gradient reached this tensor in the current pass; nodes off
  // the loss path use this to skip their backward work entirely
  const std::vector<double>* bg_if_fresh(const Tensor& t) const {
    TensorData* d = t.impl();
    return d->epoch == epoch_ ? &d->bgrad : nullptr;
  }

  // optional debug mode: validate forward outputs as they are produced
  void check(const Tensor& t, const char* op) const {
    if (!check_finite_) return;
    for (double v : t.vec()) {
      if (!std::isfinite(v))
        throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
    }
  }

 private:
  static std::uint64_t next_pass_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  std::vector<std::function<void()>> nodes_;
  std::vector<TensorData*> touched_;
  std::uint64_t epoch_ = 0;
  bool check_finite_;
  bool grad_enabled_;
};

}  // namespace dyfulm
