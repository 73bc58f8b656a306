#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dyfulm/encoder.hpp"
#include "dyfulm/nn.hpp"

namespace dyfulm {

// ---------------------------------------------------------------------------
// dynamic layer fusion: a BiLSTM walks the layer axis (tokens ride along as
// the batch), an attention vector scores each layer per token, and the
// per-token softmax over layers mixes the original layer activations

struct LayerFusionParams {
  BiLstmParams scorer;   // input d, hidden h_f
  Tensor attn_vector;    // [2·h_f]
};

inline LayerFusionParams make_layer_fusion(int d, int hidden, Rng& rng) {
  LayerFusionParams p;
  Rng scorer_rng = rng.fork(0);
  p.scorer = make_bilstm(d, hidden, scorer_rng);
  Rng attn_rng = rng.fork(1);
  p.attn_vector = init_uniform({2 * hidden}, 2 * hidden, attn_rng);
  return p;
}

struct FusedSequence {
  Tensor values;         // [T × d]
  Tensor layer_weights;  // [T × L], rows sum to 1
};

inline FusedSequence hierarchical_fuse(Tape& tp, const LayerFusionParams& p, const LayerStack& stack) {
  const int n_layers = static_cast<int>(stack.layers.size());
  detail::require(n_layers >= 1, "hierarchical_fuse: empty layer stack");
  for (const Tensor& h : stack.layers)
    detail::require(h.rank() == 2 && h.dim(1) == p.scorer.input_dim,
                    "hierarchical_fuse: layers must be [T × " + std::to_string(p.scorer.input_dim) +
                        "], got " + shape_str(h.shape()));

  std::vector<Tensor> states = bilstm_steps(tp, p.scorer, stack.layers);  // each [T × 2h]
  Tensor w_col = reshape(tp, p.attn_vector, {p.attn_vector.dim(0), 1});
  std::vector<Tensor> score_cols(static_cast<size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l)
    score_cols[static_cast<size_t>(l)] = matmul(tp, states[static_cast<size_t>(l)], w_col);  // [T × 1]
  Tensor scores = n_layers == 1 ? score_cols[0] : concat(tp, score_cols, 1);  // [T × L]
  Tensor weights = softmax(tp, scores);

  Tensor fused;
  for (int l = 0; l < n_layers; ++l) {
    Tensor term = mul(tp, take_column(tp, weights, l), stack.layers[static_cast<size_t>(l)]);
    fused = l == 0 ? term : add(tp, fused, term);
  }
  return {fused, weights};
}

// ---------------------------------------------------------------------------
// gated cross-model fusion: g = σ(W·[a; b] + bias), out = g⊙a + (1−g)⊙b

struct GateParams {
  LinearParams proj;  // 2d → d
};

inline GateParams make_gate(int d, Rng& rng) {
  return {make_linear(2 * d, d, rng)};
}

struct GatedFusion {
  Tensor values;  // [T × d]
  Tensor gate;    // [T × d], in (0,1)
};

inline GatedFusion gated_fuse(Tape& tp, const GateParams& p, const Tensor& a, const Tensor& b) {
  detail::require(a.rank() == 2 && a.shape() == b.shape(),
                  "gated_fuse: inputs must be matching [T × d], got " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()));
  Tensor g = sigmoid(tp, linear(tp, p.proj, concat(tp, {a, b}, 1)));
  Tensor ones = Tensor::full(g.shape(), 1.0);
  Tensor out = add(tp, mul(tp, g, a), mul(tp, sub(tp, ones, g), b));
  return {out, g};
}

// plain average for the gate-ablated path
inline Tensor average_fuse(Tape& tp, const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape(), "average_fuse: shape mismatch: " + shape_str(a.shape()) +
                                              " vs " + shape_str(b.shape()));
  return scale(tp, add(tp, a, b), 0.5);
}

// global average pooling over tokens: [T × d] → [d]
inline Tensor gap_pool(Tape& tp, const Tensor& x) {
  detail::require(x.rank() == 2, "gap_pool: expected [T × d], got " + shape_str(x.shape()));
  return reduce_mean(tp, x, 0);
}

}  // namespace dyfulm
