#pragma once

#include <vector>

#include "dyfulm/heads.hpp"
#include "dyfulm/ops.hpp"

namespace dyfulm {

struct TaskLosses {
  Tensor coarse;     // cross entropy, [1]
  Tensor fine;       // cross entropy, [1]
  Tensor intensity;  // squared error, [1]
};

inline TaskLosses task_losses(Tape& tp, const HeadOutputs& out, int coarse_label, int fine_label,
                              double intensity_target) {
  detail::require(intensity_target >= 0.0 && intensity_target <= 1.0,
                  "task_losses: intensity target must lie in [0,1]");
  TaskLosses l;
  l.coarse = softmax_cross_entropy(tp, out.coarse_logits, coarse_label);
  l.fine = softmax_cross_entropy(tp, out.fine_logits, fine_label);
  Tensor err = sub(tp, out.intensity, Tensor::scalar(intensity_target));
  l.intensity = mul(tp, err, err);
  return l;
}

// Learned log-variance weighting: total = Σ_t exp(−s_t)·L_t + s_t. With all
// s at 0 every factor is exactly 1 and every offset exactly 0, so the total
// is bit-identical to the plain sum taken in the same order.
struct LossWeights {
  Tensor s_coarse, s_fine, s_intensity;  // scalars, init 0
};

inline LossWeights make_loss_weights() {
  return {Tensor::zeros({1}, true), Tensor::zeros({1}, true), Tensor::zeros({1}, true)};
}

inline Tensor weighted_total(Tape& tp, const std::vector<Tensor>& log_vars,
                             const std::vector<Tensor>& losses) {
  detail::require(!losses.empty() && log_vars.size() == losses.size(),
                  "weighted_total: need one log-variance per loss");
  Tensor total;
  for (size_t t = 0; t < losses.size(); ++t) {
    Tensor factor = dyfulm::exp(tp, scale(tp, log_vars[t], -1.0));
    Tensor term = add(tp, mul(tp, factor, losses[t]), log_vars[t]);
    total = t == 0 ? term : add(tp, total, term);
  }
  return total;
}

inline Tensor combine_losses(Tape& tp, const LossWeights& w, const TaskLosses& l, bool dynamic) {
  if (dynamic)
    return weighted_total(tp, {w.s_coarse, w.s_fine, w.s_intensity}, {l.coarse, l.fine, l.intensity});
  return add(tp, add(tp, l.coarse, l.fine), l.intensity);
}

}  // namespace dyfulm
