#pragma once

#include <string>
#include <vector>

#include "dyfulm/gradcheck.hpp"
#include "dyfulm/model.hpp"

namespace dyfulm {

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool passed() const { return max_rel_error < threshold; }
};

inline ModelConfig tiny_gradcheck_config() {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.width = 8;
  cfg.depth = 2;
  cfg.ffn_hidden = 16;
  cfg.t_max = 4;
  cfg.fusion_hidden = 4;
  cfg.dropout = 0.0;
  return cfg;
}

namespace detail {

inline Tensor random_input(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace detail

// Finite-difference checks for every parameterized block plus the assembled
// model. Individual blocks must come in under block_threshold; the deep
// end-to-end composition accumulates more rounding and gets a looser bound.
inline std::vector<BlockCheck> run_gradcheck_suite(const ModelConfig& cfg = tiny_gradcheck_config(),
                                                   double block_threshold = 1e-6,
                                                   double end_to_end_threshold = 1e-4) {
  std::vector<BlockCheck> checks;
  Rng rng(2024);
  const int d = cfg.width;
  const int t_len = cfg.t_max;

  {
    Tensor x = detail::random_input({t_len, 5}, rng);
    Tensor w = detail::random_input({3, 5}, rng);
    Tensor b = detail::random_input({3}, rng);
    const double err = gradcheck([&](Tape& tp) { return affine(tp, x, w, b); }, {x, w, b});
    checks.push_back({"linear", err, block_threshold});
  }
  {
    Tensor x = detail::random_input({t_len, d}, rng);
    Tensor gain = detail::random_input({d}, rng, 0.5, 1.5);
    Tensor shift = detail::random_input({d}, rng, -0.5, 0.5);
    const double err =
        gradcheck([&](Tape& tp) { return layer_norm_op(tp, x, gain, shift, 1e-5); }, {x, gain, shift});
    checks.push_back({"layer_norm", err, block_threshold});
  }
  {
    Rng prng = rng.fork(1);
    AttentionParams p = make_attention(d, prng);
    Tensor x = detail::random_input({t_len, d}, rng);
    std::vector<Tensor> inputs = {x,        p.query.weight, p.query.bias,   p.key.weight,
                                  p.key.bias, p.value.weight, p.value.bias, p.output.weight,
                                  p.output.bias};
    const double err = gradcheck([&](Tape& tp) { return self_attention(tp, p, x); }, inputs);
    checks.push_back({"self_attention", err, block_threshold});
  }
  {
    Rng prng = rng.fork(2);
    BiLstmParams p = make_bilstm(6, cfg.fusion_hidden, prng);
    Tensor seq = detail::random_input({3, 6}, rng);
    std::vector<Tensor> inputs = {seq};
    for (const LstmCellParams* cell : {&p.fwd, &p.bwd}) {
      inputs.push_back(cell->w_input);
      inputs.push_back(cell->w_forget);
      inputs.push_back(cell->w_cell);
      inputs.push_back(cell->w_output);
      inputs.push_back(cell->b_input);
      inputs.push_back(cell->b_forget);
      inputs.push_back(cell->b_cell);
      inputs.push_back(cell->b_output);
    }
    const double err = gradcheck([&](Tape& tp) { return bilstm(tp, p, seq); }, inputs);
    checks.push_back({"bilstm", err, block_threshold});
  }
  {
    Rng prng = rng.fork(3);
    EmbeddingParams p = make_embedding(cfg.vocab_size, d, cfg.t_max, prng);
    const std::vector<int> ids = {2, 5, 3, 1};
    const double err = gradcheck([&](Tape& tp) { return embed(tp, p, ids); },
                                 {p.token_table, p.position_table});
    checks.push_back({"embedding", err, block_threshold});
  }
  {
    Rng prng = rng.fork(4);
    LayerFusionParams p = make_layer_fusion(d, cfg.fusion_hidden, prng);
    LayerStack stack;
    stack.seq_len = t_len;
    stack.layers = {detail::random_input({t_len, d}, rng), detail::random_input({t_len, d}, rng)};
    std::vector<Tensor> inputs = stack.layers;
    for (const LstmCellParams* cell : {&p.scorer.fwd, &p.scorer.bwd}) {
      inputs.push_back(cell->w_input);
      inputs.push_back(cell->w_forget);
      inputs.push_back(cell->w_cell);
      inputs.push_back(cell->w_output);
      inputs.push_back(cell->b_input);
      inputs.push_back(cell->b_forget);
      inputs.push_back(cell->b_cell);
      inputs.push_back(cell->b_output);
    }
    inputs.push_back(p.attn_vector);
    const double err =
        gradcheck([&](Tape& tp) { return hierarchical_fuse(tp, p, stack).values; }, inputs);
    checks.push_back({"layer_fusion", err, block_threshold});
  }
  {
    Rng prng = rng.fork(5);
    GateParams p = make_gate(d, prng);
    Tensor a = detail::random_input({t_len, d}, rng);
    Tensor b = detail::random_input({t_len, d}, rng);
    const double err = gradcheck([&](Tape& tp) { return gated_fuse(tp, p, a, b).values; },
                                 {a, b, p.proj.weight, p.proj.bias});
    checks.push_back({"gated_fusion", err, block_threshold});
  }
  {
    Rng prng = rng.fork(6);
    HeadParams p = make_heads(d, prng);
    Tensor h = detail::random_input({d}, rng);
    std::vector<Tensor> inputs = {h,
                                  p.coarse.weight,
                                  p.coarse.bias,
                                  p.intensity.weight,
                                  p.intensity.bias,
                                  p.guidance.weight,
                                  p.guidance.bias,
                                  p.fine.weight,
                                  p.fine.bias};
    auto f = [&](Tape& tp) {
      const HeadOutputs out = heads_forward(tp, p, h, true);
      return concat(tp, {out.coarse_logits, out.intensity, out.fine_logits}, 0);
    };
    checks.push_back({"heads", gradcheck(f, inputs), block_threshold});
  }
  {
    Tensor coarse_logits = detail::random_input({3}, rng);
    Tensor fine_logits = detail::random_input({5}, rng);
    Tensor pre_intensity = detail::random_input({1}, rng);
    LossWeights w = make_loss_weights();
    w.s_coarse.data()[0] = 0.3;
    w.s_fine.data()[0] = -0.2;
    w.s_intensity.data()[0] = 0.1;
    auto f = [&](Tape& tp) {
      HeadOutputs out;
      out.coarse_logits = coarse_logits;
      out.fine_logits = fine_logits;
      out.intensity = sigmoid(tp, pre_intensity);
      const TaskLosses l = task_losses(tp, out, 1, 3, 0.7);
      return combine_losses(tp, w, l, true);
    };
    std::vector<Tensor> inputs = {coarse_logits, fine_logits, pre_intensity,
                                  w.s_coarse,    w.s_fine,    w.s_intensity};
    checks.push_back({"losses", gradcheck(f, inputs), block_threshold});
  }
  {
    Model model(cfg, 11);
    const std::vector<int> ids = {3, 7, 2, 4};
    const AblationToggles all_on;
    auto f = [&](Tape& tp) {
      const ForwardResult fwd = model.forward(tp, ids, all_on);
      return model.example_loss(tp, fwd, 1, 3, 0.6, all_on).total;
    };
    checks.push_back({"end_to_end", gradcheck(f, model.params()), end_to_end_threshold});
  }
  return checks;
}

}  // namespace dyfulm
