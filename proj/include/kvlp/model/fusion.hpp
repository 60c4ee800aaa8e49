#pragma once

#include "kvlp/model/layers.hpp"

#include <vector>

namespace kvlp::model {

struct FusionConfig {
  int layers = 2;
  int width = 64;
  int heads = 4;
  int ffn_mult = 4;
  bool rk_enabled = true;
  bool normalize_p = false;  // divide each row of P by its sum
};

// Dual-stream co-attention weights for one layer (post-norm sub-layers).
struct CoAttentionBlock {
  MultiHeadAttention sa_v, sa_l, ca_v, ca_l;
  LayerNorm ln_sa_v, ln_sa_l, ln_ca_v, ln_ca_l, ln_ff_v, ln_ff_l;
  FeedForward ffn_v, ffn_l;
};

struct EntityBlock {
  MultiHeadAttention sa_e, ca_e;
  LayerNorm ln_sa_e, ln_ca_e, ln_ff_e;
  FeedForward ffn_e;
};

struct FusionLayer {
  CoAttentionBlock co;
  EntityBlock entity;

  FusionLayer() = default;
  FusionLayer(ParamStore& ps, const std::string& name, const FusionConfig& cfg, Rng& rng);
};

// Head-averaged attention maps of one fusion layer.
struct LayerTrace {
  Matrix text_image;    // (N_l+2) × (N_v+1): text queries over vision keys
  Matrix image_text;    // (N_v+1) × (N_l+2)
  Matrix entity_image;  // N_es × (N_v+1); empty when the entity stream is off
};

struct FusionTrace {
  std::vector<LayerTrace> layers;
};

struct CoAttentionStates {
  Tensor vs, ls;  // after self-attention + residual/norm
  Tensor vc, lc;  // after cross-attention + residual/norm
};

struct FusionOutput {
  Tensor zv, zl, ze;
};

// Self-attention then cross-attention sub-layers of both streams; the cross
// step uses the other stream's self-attention output as keys and values.
CoAttentionStates co_attention_sublayers(const CoAttentionBlock& b, const Tensor& hv, const Tensor& hl,
                                         LayerTrace* trace = nullptr);

// LN(x + FFN(x)).
Tensor feed_forward_sublayer(const FeedForward& ffn, const LayerNorm& ln, const Tensor& x);

// Full knowledge-free co-attention layer: (Z^v, Z^l).
std::pair<Tensor, Tensor> co_attention_layer(const CoAttentionBlock& b, const Tensor& hv, const Tensor& hl);

// H^es = LN(H^e + SA(H^e)); H^ec = LN(H^es + CA(H^es, H^vs)). Empty in, empty out.
Tensor entity_stream_step(const EntityBlock& b, const Tensor& he, const Tensor& hvs, Matrix* attention = nullptr);

// P · H^ec + H^lc with P of shape (rows of H^lc) × (rows of H^ec).
Tensor fuse_text_with_entities(const Tensor& hec, const Tensor& hlc, const Matrix& p);

// Pads P (N_l × N_es) with zero rows for [CLS] and [SEP].
Matrix pad_matching_matrix(const Matrix& p);

// Rows of P scaled to sum to 1; all-zero rows stay zero.
Matrix row_normalize(const Matrix& p);

// One layer: co-attention, entity stream, text fusion, three feed-forwards.
FusionOutput fusion_layer(const FusionLayer& layer, const Tensor& hv, const Tensor& hl, const Tensor& he,
                          const Matrix& p_padded, bool rk_enabled, LayerTrace* trace = nullptr);

// Stacks the layers, chaining Z^e into the next layer's entity input. `he`
// may be empty (0 rows or a null tensor); p_padded is (N_l+2) × N_es.
FusionOutput fusion_forward(const std::vector<FusionLayer>& layers, const Tensor& hv, const Tensor& hl,
                            const Tensor& he, const Matrix& p_padded, const FusionConfig& cfg,
                            FusionTrace* trace = nullptr);

bool empty_stream(const Tensor& t);

}  // namespace kvlp::model
