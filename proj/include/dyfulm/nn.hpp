#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dyfulm/ops.hpp"
#include "dyfulm/rng.hpp"
#include "dyfulm/tape.hpp"
#include "dyfulm/tensor.hpp"

namespace dyfulm {

// parameters init uniform in ±1/√fan_in
inline Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-bound, bound);
  return t;
}

// ---------------------------------------------------------------------------
// linear

struct LinearParams {
  Tensor weight;  // [out × in]
  Tensor bias;    // [out]
};

inline LinearParams make_linear(int in_dim, int out_dim, Rng& rng) {
  LinearParams p;
  p.weight = init_uniform({out_dim, in_dim}, in_dim, rng);
  p.bias = init_uniform({out_dim}, in_dim, rng);
  return p;
}

inline Tensor linear(Tape& tp, const LinearParams& p, const Tensor& x) {
  return affine(tp, x, p.weight, p.bias);
}

// ---------------------------------------------------------------------------
// layer norm with learned gain and shift

struct NormParams {
  Tensor gain;   // [d], init 1
  Tensor shift;  // [d], init 0
};

inline NormParams make_norm(int d) {
  NormParams p;
  p.gain = Tensor::full({d}, 1.0, true);
  p.shift = Tensor::zeros({d}, true);
  return p;
}

inline Tensor layer_norm(Tape& tp, const Tensor& x, const Tensor& gain, const Tensor& shift,
                         double eps = 1e-5) {
  return layer_norm_op(tp, x, gain, shift, eps);
}

inline Tensor layer_norm(Tape& tp, const NormParams& p, const Tensor& x, double eps = 1e-5) {
  return layer_norm_op(tp, x, p.gain, p.shift, eps);
}

// ---------------------------------------------------------------------------
// single-head self attention

struct AttentionParams {
  LinearParams query, key, value, output;
};

inline AttentionParams make_attention(int d, Rng& rng) {
  AttentionParams p;
  p.query = make_linear(d, d, rng);
  p.key = make_linear(d, d, rng);
  p.value = make_linear(d, d, rng);
  p.output = make_linear(d, d, rng);
  return p;
}

struct AttentionResult {
  Tensor values;   // [T × d]
  Tensor weights;  // [T × T], rows sum to 1
};

inline AttentionResult self_attention_detailed(Tape& tp, const AttentionParams& p, const Tensor& x) {
  detail::require(x.rank() == 2, "self_attention: expected [T × d] input, got " + shape_str(x.shape()));
  const int d = x.dim(1);
  Tensor q = linear(tp, p.query, x);
  Tensor k = linear(tp, p.key, x);
  Tensor v = linear(tp, p.value, x);
  Tensor scores = scale(tp, matmul(tp, q, transpose(tp, k)), 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor attn = softmax(tp, scores);
  Tensor mixed = matmul(tp, attn, v);
  return {linear(tp, p.output, mixed), attn};
}

inline Tensor self_attention(Tape& tp, const AttentionParams& p, const Tensor& x) {
  return self_attention_detailed(tp, p, x).values;
}

// ---------------------------------------------------------------------------
// bidirectional lstm

// gate weights act on [input; hidden]
struct LstmCellParams {
  Tensor w_input, w_forget, w_cell, w_output;  // each [h × (in+h)]
  Tensor b_input, b_forget, b_cell, b_output;  // each [h]
};

struct BiLstmParams {
  LstmCellParams fwd, bwd;
  int input_dim = 0;
  int hidden_dim = 0;
};

inline LstmCellParams make_lstm_cell(int in_dim, int hidden, Rng& rng) {
  const int z = in_dim + hidden;
  LstmCellParams p;
  p.w_input = init_uniform({hidden, z}, z, rng);
  p.w_forget = init_uniform({hidden, z}, z, rng);
  p.w_cell = init_uniform({hidden, z}, z, rng);
  p.w_output = init_uniform({hidden, z}, z, rng);
  p.b_input = init_uniform({hidden}, z, rng);
  // forget gate starts open so early training does not wipe cell state
  p.b_forget = Tensor::full({hidden}, 1.0, true);
  p.b_cell = init_uniform({hidden}, z, rng);
  p.b_output = init_uniform({hidden}, z, rng);
  return p;
}

inline BiLstmParams make_bilstm(int in_dim, int hidden, Rng& rng) {
  BiLstmParams p;
  p.fwd = make_lstm_cell(in_dim, hidden, rng);
  p.bwd = make_lstm_cell(in_dim, hidden, rng);
  p.input_dim = in_dim;
  p.hidden_dim = hidden;
  return p;
}

namespace detail {

struct LstmState {
  Tensor h, c;  // each [B × hidden]
};

inline LstmState lstm_step(Tape& tp, const LstmCellParams& p, const Tensor& x, const LstmState& s) {
  Tensor z = concat(tp, {x, s.h}, 1);
  Tensor gi = sigmoid(tp, affine(tp, z, p.w_input, p.b_input));
  Tensor gf = sigmoid(tp, affine(tp, z, p.w_forget, p.b_forget));
  Tensor gc = dyfulm::tanh(tp, affine(tp, z, p.w_cell, p.b_cell));
  Tensor go = sigmoid(tp, affine(tp, z, p.w_output, p.b_output));
  Tensor c = add(tp, mul(tp, gf, s.c), mul(tp, gi, gc));
  Tensor h = mul(tp, go, dyfulm::tanh(tp, c));
  return {h, c};
}

}  // namespace detail

// Runs both directions over a short sequence of [B × in] steps and returns
// one [B × 2h] tensor per step (forward state then backward state). The
// batch axis lets callers reuse one cell evaluation across many sequences.
inline std::vector<Tensor> bilstm_steps(Tape& tp, const BiLstmParams& p,
                                        const std::vector<Tensor>& steps) {
  detail::require(!steps.empty(), "bilstm: empty sequence");
  const int batch = steps[0].dim(0);
  for (const Tensor& s : steps)
    detail::require(s.rank() == 2 && s.dim(0) == batch && s.dim(1) == p.input_dim,
                    "bilstm: every step must be [" + std::to_string(batch) + " × " +
                        std::to_string(p.input_dim) + "], got " + shape_str(s.shape()));
  const int n = static_cast<int>(steps.size());
  const Tensor zero_state = Tensor::zeros({batch, p.hidden_dim});

  std::vector<Tensor> fwd(static_cast<size_t>(n));
  detail::LstmState state{zero_state, zero_state};
  for (int i = 0; i < n; ++i) {
    state = detail::lstm_step(tp, p.fwd, steps[static_cast<size_t>(i)], state);
    fwd[static_cast<size_t>(i)] = state.h;
  }
  std::vector<Tensor> bwd(static_cast<size_t>(n));
  state = {zero_state, zero_state};
  for (int i = n - 1; i >= 0; --i) {
    state = detail::lstm_step(tp, p.bwd, steps[static_cast<size_t>(i)], state);
    bwd[static_cast<size_t>(i)] = state.h;
  }
  std::vector<Tensor> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = concat(tp, {fwd[static_cast<size_t>(i)], bwd[static_cast<size_t>(i)]}, 1);
  return out;
}

// sequence-as-rows form: [L × in] → [L × 2h]
inline Tensor bilstm(Tape& tp, const BiLstmParams& p, const Tensor& seq) {
  detail::require(seq.rank() == 2 && seq.dim(1) == p.input_dim,
                  "bilstm: expected [L × " + std::to_string(p.input_dim) + "], got " +
                      shape_str(seq.shape()));
  const int n = seq.dim(0);
  std::vector<Tensor> steps(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) steps[static_cast<size_t>(i)] = take_row(tp, seq, i);
  std::vector<Tensor> rows = bilstm_steps(tp, p, steps);
  return concat(tp, rows, 0);
}

// ---------------------------------------------------------------------------
// embeddings

struct EmbeddingParams {
  Tensor token_table;     // [V × d]
  Tensor position_table;  // [T_max × d]
};

inline EmbeddingParams make_embedding(int vocab, int d, int t_max, Rng& rng) {
  EmbeddingParams p;
  p.token_table = init_uniform({vocab, d}, d, rng);
  p.position_table = init_uniform({t_max, d}, d, rng);
  return p;
}

inline Tensor embed(Tape& tp, const EmbeddingParams& p, const std::vector<int>& ids) {
  detail::require(!ids.empty(), "embed: empty id sequence");
  const int t_max = p.position_table.dim(0);
  detail::require(static_cast<int>(ids.size()) <= t_max,
                  "embed: sequence length " + std::to_string(ids.size()) + " exceeds the position table (" +
                      std::to_string(t_max) + ")");
  std::vector<int> positions(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  return add(tp, lookup_rows(tp, p.token_table, ids), lookup_rows(tp, p.position_table, positions));
}

// ---------------------------------------------------------------------------
// inverted dropout; identity when rate is 0

inline Tensor dropout(Tape& tp, const Tensor& x, double rate, Rng& rng) {
  detail::require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return x;
  const double keep = 1.0 - rate;
  Tensor mask = Tensor::zeros(x.shape());
  for (int i = 0; i < mask.numel(); ++i)
    mask.data()[i] = rng.uniform01() < keep ? 1.0 / keep : 0.0;
  return mul(tp, x, mask);
}

}  // namespace dyfulm
