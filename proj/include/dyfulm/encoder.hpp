#pragma once

#include <string>
#include <vector>

#include "dyfulm/nn.hpp"

namespace dyfulm {

struct TransformerBlockParams {
  AttentionParams attn;
  LinearParams ffn_in, ffn_out;
  NormParams norm_attn, norm_ffn;
};

struct EncoderParams {
  EmbeddingParams embedding;
  std::vector<TransformerBlockParams> blocks;
  int width = 0;  // d
};

inline EncoderParams make_encoder(int vocab, int d, int depth, int ffn_hidden, int t_max, Rng& rng) {
  detail::require(vocab >= 2 && d >= 1 && depth >= 1 && ffn_hidden >= 1 && t_max >= 1,
                  "make_encoder: all sizes must be positive (vocab at least 2)");
  EncoderParams p;
  p.width = d;
  Rng emb_rng = rng.fork(0);
  p.embedding = make_embedding(vocab, d, t_max, emb_rng);
  for (int l = 0; l < depth; ++l) {
    Rng blk_rng = rng.fork(static_cast<uint64_t>(l) + 1);
    TransformerBlockParams blk;
    blk.attn = make_attention(d, blk_rng);
    blk.ffn_in = make_linear(d, ffn_hidden, blk_rng);
    blk.ffn_out = make_linear(ffn_hidden, d, blk_rng);
    blk.norm_attn = make_norm(d);
    blk.norm_ffn = make_norm(d);
    p.blocks.push_back(std::move(blk));
  }
  return p;
}

// every block's post-norm output, shallow to deep
struct LayerStack {
  std::vector<Tensor> layers;  // each [T × d]
  int seq_len = 0;
};

// Pre-norm residual blocks would hide shallow layers from the fusion stage,
// so blocks are post-norm: x = norm(x + sublayer(x)). Dropout applies after
// the embedding sum and inside the feed-forward path; pass a null rng (or
// rate 0) for evaluation.
inline LayerStack encode(Tape& tp, const EncoderParams& p, const std::vector<int>& ids,
                         double dropout_rate = 0.0, Rng* dropout_rng = nullptr) {
  detail::require(!ids.empty(), "encode: empty token sequence");
  const bool use_dropout = dropout_rate > 0.0 && dropout_rng != nullptr;
  Tensor x = embed(tp, p.embedding, ids);
  if (use_dropout) x = dropout(tp, x, dropout_rate, *dropout_rng);
  LayerStack stack;
  stack.seq_len = static_cast<int>(ids.size());
  stack.layers.reserve(p.blocks.size());
  for (const TransformerBlockParams& blk : p.blocks) {
    Tensor a = self_attention(tp, blk.attn, x);
    x = layer_norm(tp, blk.norm_attn, add(tp, x, a));
    Tensor f = linear(tp, blk.ffn_out, relu(tp, linear(tp, blk.ffn_in, x)));
    if (use_dropout) f = dropout(tp, f, dropout_rate, *dropout_rng);
    x = layer_norm(tp, blk.norm_ffn, add(tp, x, f));
    stack.layers.push_back(x);
  }
  return stack;
}

}  // namespace dyfulm
