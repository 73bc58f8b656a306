#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "dyfulm/gradcheck.hpp"
#include "dyfulm/heads.hpp"
#include "dyfulm/losses.hpp"

using namespace dyfulm;

namespace {

Tensor filled(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

TEST(Heads, ShapesAndRanges) {
  Rng rng(3);
  HeadParams p = make_heads(8, rng);
  Tensor h = filled({8}, rng);
  Tape tp;
  HeadOutputs out = heads_forward(tp, p, h);
  EXPECT_EQ(out.coarse_logits.dim(0), 3);
  EXPECT_EQ(out.fine_logits.dim(0), 5);
  EXPECT_EQ(out.intensity.numel(), 1);
  EXPECT_EQ(out.guidance.dim(0), 8);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    EXPECT_GT(out.coarse_probs.data()[i], 0.0);
    total += out.coarse_probs.data()[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_GT(out.intensity.value(), 0.0);
  EXPECT_LT(out.intensity.value(), 1.0);
  for (int i = 0; i < 8; ++i) {
    EXPECT_GT(out.guidance.data()[i], 0.0);
    EXPECT_LT(out.guidance.data()[i], 1.0);
  }
}

TEST(Heads, ZeroGuidanceProjectionHalvesFeatures) {
  Rng rng(5);
  HeadParams p = make_heads(6, rng);
  for (int i = 0; i < p.guidance.weight.numel(); ++i) p.guidance.weight.data()[i] = 0.0;
  for (int i = 0; i < p.guidance.bias.numel(); ++i) p.guidance.bias.data()[i] = 0.0;
  Tensor h = filled({6}, rng);
  Tape tp;
  HeadOutputs out = heads_forward(tp, p, h);
  // gate is exactly 0.5 everywhere, so the fine head sees h/2 bitwise
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(out.guidance.data()[i], 0.5);
    EXPECT_EQ(out.recalibrated.data()[i], h.data()[i] * 0.5);
  }
  Tensor expected = linear(tp, p.fine, scale(tp, h, 0.5));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out.fine_logits.data()[i], expected.data()[i]);
}

TEST(Heads, RecalibrationShrinksMagnitudes) {
  Rng rng(7);
  HeadParams p = make_heads(8, rng);
  Tensor h = filled({8}, rng);
  Tape tp;
  HeadOutputs out = heads_forward(tp, p, h);
  for (int i = 0; i < 8; ++i)
    EXPECT_LE(std::abs(out.recalibrated.data()[i]), std::abs(h.data()[i]));
}

TEST(Heads, ZeroFeaturesLeaveOnlyFineBias) {
  Rng rng(9);
  HeadParams p = make_heads(8, rng);
  Tape tp;
  HeadOutputs out = heads_forward(tp, p, Tensor::zeros({8}));
  // h = 0 makes h ⊙ guidance = 0 regardless of the gate
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out.fine_logits.data()[i], p.fine.bias.data()[i]);
}

TEST(Heads, GuidanceOffSkipsRecalibration) {
  Rng rng(11);
  HeadParams p = make_heads(8, rng);
  Tensor h = filled({8}, rng);
  Tape tp;
  HeadOutputs with = heads_forward(tp, p, h, true);
  HeadOutputs without = heads_forward(tp, p, h, false);
  EXPECT_FALSE(without.guidance.defined());
  EXPECT_FALSE(without.recalibrated.defined());
  Tensor direct = linear(tp, p.fine, h);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(without.fine_logits.data()[i], direct.data()[i]);
  double diff = 0.0;
  for (int i = 0; i < 5; ++i) diff += std::abs(with.fine_logits.data()[i] - without.fine_logits.data()[i]);
  EXPECT_GT(diff, 1e-9);
}

TEST(Heads, FineLossReachesCoarseWeightsThroughGuidance) {
  // the fine loss alone must push gradient into the coarse head via the
  // guidance signal, and that path must agree with finite differences
  Rng rng(13);
  HeadParams p = make_heads(6, rng);
  Tensor h = filled({6}, rng);

  p.coarse.weight.set_requires_grad(true);
  p.coarse.weight.zero_grad();
  {
    Tape tp;
    HeadOutputs out = heads_forward(tp, p, h);
    Tensor loss = softmax_cross_entropy(tp, out.fine_logits, 3);
    tp.backward(loss);
  }
  double norm = 0.0;
  for (double g : p.coarse.weight.grad()) norm += g * g;
  EXPECT_GT(std::sqrt(norm), 0.0);
  p.coarse.weight.set_requires_grad(false);
  p.coarse.weight.zero_grad();

  const double err = gradcheck(
      [&](Tape& tp) {
        HeadOutputs out = heads_forward(tp, p, h);
        return softmax_cross_entropy(tp, out.fine_logits, 3);
      },
      {p.coarse.weight, p.coarse.bias});
  EXPECT_LT(err, 1e-4);
}

TEST(Heads, RejectsMatrixInput) {
  Rng rng(17);
  HeadParams p = make_heads(4, rng);
  Tape tp;
  EXPECT_THROW(heads_forward(tp, p, Tensor::zeros({2, 4})), std::invalid_argument);
}

}  // namespace
