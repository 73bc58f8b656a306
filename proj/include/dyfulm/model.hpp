#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dyfulm/config.hpp"
#include "dyfulm/encoder.hpp"
#include "dyfulm/fusion.hpp"
#include "dyfulm/heads.hpp"
#include "dyfulm/losses.hpp"

namespace dyfulm {

// token id 0 is reserved padding throughout the pipeline
inline constexpr int kPadTokenId = 0;

struct ForwardResult {
  FusedSequence branch_a, branch_b;  // per-branch layer mixes
  Tensor fused;                      // [T × d]
  Tensor gate;                       // [T × d]; unset when gated fusion is off
  Tensor pooled;                     // [d]
  HeadOutputs heads;
};

struct ExampleLoss {
  TaskLosses parts;
  Tensor total;  // [1]
};

// Two differently-seeded encoders read the same tokens; each branch mixes
// its layer stack, a gate blends the branches, and pooled features feed the
// task heads. Ablation toggles swap stages for their plain fallbacks.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    detail::require(cfg.vocab_size >= 2, "model: vocab_size must be at least 2 (pad + unk)");
    detail::require(cfg.width >= 1 && cfg.depth >= 1 && cfg.ffn_hidden >= 1 && cfg.t_max >= 1 &&
                        cfg.fusion_hidden >= 1,
                    "model: all sizes must be positive");
    detail::require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "model: dropout must be in [0,1)");
    Rng root(seed);
    Rng r_enc_a = root.fork(1);
    Rng r_enc_b = root.fork(2);
    Rng r_fuse_a = root.fork(3);
    Rng r_fuse_b = root.fork(4);
    Rng r_gate = root.fork(5);
    Rng r_heads = root.fork(6);
    encoder_a_ = make_encoder(cfg.vocab_size, cfg.width, cfg.depth, cfg.ffn_hidden, cfg.t_max, r_enc_a);
    encoder_b_ = make_encoder(cfg.vocab_size, cfg.width, cfg.depth, cfg.ffn_hidden, cfg.t_max, r_enc_b);
    fusion_a_ = make_layer_fusion(cfg.width, cfg.fusion_hidden, r_fuse_a);
    fusion_b_ = make_layer_fusion(cfg.width, cfg.fusion_hidden, r_fuse_b);
    gate_ = make_gate(cfg.width, r_gate);
    heads_ = make_heads(cfg.width, r_heads);
    loss_weights_ = make_loss_weights();
    build_name_table();
  }

  const ModelConfig& config() const { return cfg_; }
  LossWeights& loss_weights() { return loss_weights_; }

  // pass a dropout rng to train; leave it null to evaluate
  ForwardResult forward(Tape& tp, const std::vector<int>& ids, const AblationToggles& toggles = {},
                        Rng* dropout_rng = nullptr) const {
    detail::require(!ids.empty(), "model: empty token sequence");
    detail::require(static_cast<int>(ids.size()) <= cfg_.t_max,
                    "model: sequence length " + std::to_string(ids.size()) + " exceeds t_max " +
                        std::to_string(cfg_.t_max));
    // trailing padding carries no signal; drop it instead of attending over it
    size_t len = ids.size();
    while (len > 1 && ids[len - 1] == kPadTokenId) --len;
    std::vector<int> trimmed(ids.begin(), ids.begin() + static_cast<long>(len));

    const double rate = dropout_rng ? cfg_.dropout : 0.0;
    ForwardResult r;
    LayerStack stack_a = encode(tp, encoder_a_, trimmed, rate, dropout_rng);
    LayerStack stack_b = encode(tp, encoder_b_, trimmed, rate, dropout_rng);
    if (toggles.layer_fusion) {
      r.branch_a = hierarchical_fuse(tp, fusion_a_, stack_a);
      r.branch_b = hierarchical_fuse(tp, fusion_b_, stack_b);
    } else {
      r.branch_a = {stack_a.layers.back(), Tensor()};
      r.branch_b = {stack_b.layers.back(), Tensor()};
    }
    if (toggles.gated_fusion) {
      GatedFusion gf = gated_fuse(tp, gate_, r.branch_a.values, r.branch_b.values);
      r.fused = gf.values;
      r.gate = gf.gate;
    } else {
      r.fused = average_fuse(tp, r.branch_a.values, r.branch_b.values);
    }
    r.pooled = gap_pool(tp, r.fused);
    r.heads = heads_forward(tp, heads_, r.pooled, toggles.hierarchical_guidance);
    return r;
  }

  ExampleLoss example_loss(Tape& tp, const ForwardResult& fwd, int coarse_label, int fine_label,
                           double intensity_target, const AblationToggles& toggles = {}) const {
    ExampleLoss l;
    l.parts = task_losses(tp, fwd.heads, coarse_label, fine_label, intensity_target);
    l.total = combine_losses(tp, loss_weights_, l.parts, toggles.dynamic_loss);
    return l;
  }

  // stable name → tensor listing; iteration order is the serialization order
  const std::vector<std::pair<std::string, Tensor>>& named_params() const { return named_; }

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    out.reserve(named_.size());
    for (const auto& [name, t] : named_) out.push_back(t);
    return out;
  }

  void zero_grad() {
    for (auto& [name, t] : named_) t.zero_grad();
  }

 private:
  void add_linear(const std::string& prefix, const LinearParams& p) {
    named_.emplace_back(prefix + ".weight", p.weight);
    named_.emplace_back(prefix + ".bias", p.bias);
  }
  void add_norm(const std::string& prefix, const NormParams& p) {
    named_.emplace_back(prefix + ".gain", p.gain);
    named_.emplace_back(prefix + ".shift", p.shift);
  }
  void add_lstm_cell(const std::string& prefix, const LstmCellParams& p) {
    named_.emplace_back(prefix + ".w_input", p.w_input);
    named_.emplace_back(prefix + ".w_forget", p.w_forget);
    named_.emplace_back(prefix + ".w_cell", p.w_cell);
    named_.emplace_back(prefix + ".w_output", p.w_output);
    named_.emplace_back(prefix + ".b_input", p.b_input);
    named_.emplace_back(prefix + ".b_forget", p.b_forget);
    named_.emplace_back(prefix + ".b_cell", p.b_cell);
    named_.emplace_back(prefix + ".b_output", p.b_output);
  }
  void add_encoder(const std::string& prefix, const EncoderParams& p) {
    named_.emplace_back(prefix + ".embedding.tokens", p.embedding.token_table);
    named_.emplace_back(prefix + ".embedding.positions", p.embedding.position_table);
    for (size_t l = 0; l < p.blocks.size(); ++l) {
      const std::string blk = prefix + ".block" + std::to_string(l);
      add_linear(blk + ".attn.query", p.blocks[l].attn.query);
      add_linear(blk + ".attn.key", p.blocks[l].attn.key);
      add_linear(blk + ".attn.value", p.blocks[l].attn.value);
      add_linear(blk + ".attn.output", p.blocks[l].attn.output);
      add_linear(blk + ".ffn_in", p.blocks[l].ffn_in);
      add_linear(blk + ".ffn_out", p.blocks[l].ffn_out);
      add_norm(blk + ".norm_attn", p.blocks[l].norm_attn);
      add_norm(blk + ".norm_ffn", p.blocks[l].norm_ffn);
    }
  }
  void add_layer_fusion(const std::string& prefix, const LayerFusionParams& p) {
    add_lstm_cell(prefix + ".scorer.fwd", p.scorer.fwd);
    add_lstm_cell(prefix + ".scorer.bwd", p.scorer.bwd);
    named_.emplace_back(prefix + ".attn_vector", p.attn_vector);
  }
  void build_name_table() {
    add_encoder("encoder_a", encoder_a_);
    add_encoder("encoder_b", encoder_b_);
    add_layer_fusion("layer_fusion_a", fusion_a_);
    add_layer_fusion("layer_fusion_b", fusion_b_);
    add_linear("gate.proj", gate_.proj);
    add_linear("heads.coarse", heads_.coarse);
    add_linear("heads.intensity", heads_.intensity);
    add_linear("heads.guidance", heads_.guidance);
    add_linear("heads.fine", heads_.fine);
    named_.emplace_back("loss.s_coarse", loss_weights_.s_coarse);
    named_.emplace_back("loss.s_fine", loss_weights_.s_fine);
    named_.emplace_back("loss.s_intensity", loss_weights_.s_intensity);
  }

  ModelConfig cfg_;
  EncoderParams encoder_a_, encoder_b_;
  LayerFusionParams fusion_a_, fusion_b_;
  GateParams gate_;
  HeadParams heads_;
  LossWeights loss_weights_;
  std::vector<std::pair<std::string, Tensor>> named_;
};

}  // namespace dyfulm
