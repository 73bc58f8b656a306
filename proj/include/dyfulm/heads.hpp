#pragma once

#include "dyfulm/nn.hpp"

namespace dyfulm {

// Task heads over the pooled representation. The coarse distribution and the
// intensity estimate feed a guidance gate that recalibrates the features the
// fine head sees, so the easy tasks steer the hard one.

inline constexpr int kCoarseClasses = 3;
inline constexpr int kFineClasses = 5;

struct HeadParams {
  LinearParams coarse;     // d → 3
  LinearParams intensity;  // d → 1
  LinearParams guidance;   // 4 → d
  LinearParams fine;       // d → 5
};

inline HeadParams make_heads(int d, Rng& rng) {
  HeadParams p;
  p.coarse = make_linear(d, kCoarseClasses, rng);
  p.intensity = make_linear(d, 1, rng);
  p.guidance = make_linear(kCoarseClasses + 1, d, rng);
  p.fine = make_linear(d, kFineClasses, rng);
  return p;
}

struct HeadOutputs {
  Tensor coarse_logits;  // [3]
  Tensor coarse_probs;   // [3]
  Tensor intensity;      // [1], in (0,1)
  Tensor guidance;       // [d], in (0,1); unset when guidance is disabled
  Tensor recalibrated;   // [d]; unset when guidance is disabled
  Tensor fine_logits;    // [5]
};

inline HeadOutputs heads_forward(Tape& tp, const HeadParams& p, const Tensor& h,
                                 bool use_guidance = true) {
  detail::require(h.rank() == 1, "heads: expected pooled vector, got " + shape_str(h.shape()));
  HeadOutputs out;
  out.coarse_logits = linear(tp, p.coarse, h);
  out.coarse_probs = softmax(tp, out.coarse_logits);
  out.intensity = sigmoid(tp, linear(tp, p.intensity, h));
  if (use_guidance) {
    Tensor signal = concat(tp, {out.coarse_probs, out.intensity}, 0);
    out.guidance = sigmoid(tp, linear(tp, p.guidance, signal));
    out.recalibrated = mul(tp, h, out.guidance);
    out.fine_logits = linear(tp, p.fine, out.recalibrated);
  } else {
    out.fine_logits = linear(tp, p.fine, h);
  }
  return out;
}

}  // namespace dyfulm
