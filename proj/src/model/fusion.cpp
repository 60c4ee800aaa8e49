#include "kvlp/model/fusion.hpp"

#include "kvlp/autodiff/ops.hpp"

namespace kvlp::model {

FusionLayer::FusionLayer(ParamStore& ps, const std::string& name, const FusionConfig& cfg, Rng& rng) {
  const Index d = cfg.width, hidden = static_cast<Index>(cfg.ffn_mult) * cfg.width;
  co.sa_v = MultiHeadAttention(ps, name + ".sa_v", d, cfg.heads, rng);
  co.sa_l = MultiHeadAttention(ps, name + ".sa_l", d, cfg.heads, rng);
  co.ca_v = MultiHeadAttention(ps, name + ".ca_v", d, cfg.heads, rng);
  co.ca_l = MultiHeadAttention(ps, name + ".ca_l", d, cfg.heads, rng);
  co.ln_sa_v = LayerNorm(ps, name + ".ln_sa_v", d);
  co.ln_sa_l = LayerNorm(ps, name + ".ln_sa_l", d);
  co.ln_ca_v = LayerNorm(ps, name + ".ln_ca_v", d);
  co.ln_ca_l = LayerNorm(ps, name + ".ln_ca_l", d);
  co.ln_ff_v = LayerNorm(ps, name + ".ln_ff_v", d);
  co.ln_ff_l = LayerNorm(ps, name + ".ln_ff_l", d);
  co.ffn_v = FeedForward(ps, name + ".ffn_v", d, hidden, rng);
  co.ffn_l = FeedForward(ps, name + ".ffn_l", d, hidden, rng);
  entity.sa_e = MultiHeadAttention(ps, name + ".sa_e", d, cfg.heads, rng);
  entity.ca_e = MultiHeadAttention(ps, name + ".ca_e", d, cfg.heads, rng);
  entity.ln_sa_e = LayerNorm(ps, name + ".ln_sa_e", d);
  entity.ln_ca_e = LayerNorm(ps, name + ".ln_ca_e", d);
  entity.ln_ff_e = LayerNorm(ps, name + ".ln_ff_e", d);
  entity.ffn_e = FeedForward(ps, name + ".ffn_e", d, hidden, rng);
}

bool empty_stream(const Tensor& t) { return !t.node() || t.rows() == 0; }

CoAttentionStates co_attention_sublayers(const CoAttentionBlock& b, const Tensor& hv, const Tensor& hl,
                                         LayerTrace* trace) {
  if (hv.cols() != hl.cols()) throw ad::DimensionError("co-attention: stream widths differ");
  CoAttentionStates s;
  s.vs = b.ln_sa_v(ad::add(hv, b.sa_v(hv, hv)));
  s.ls = b.ln_sa_l(ad::add(hl, b.sa_l(hl, hl)));
  AttentionRecord rv, rl;
  s.vc = b.ln_ca_v(ad::add(s.vs, b.ca_v(s.vs, s.ls, {}, trace ? &rv : nullptr)));
  s.lc = b.ln_ca_l(ad::add(s.ls, b.ca_l(s.ls, s.vs, {}, trace ? &rl : nullptr)));
  if (trace) {
    trace->image_text = rv.mean();
    trace->text_image = rl.mean();
  }
  return s;
}

Tensor feed_forward_sublayer(const FeedForward& ffn, const LayerNorm& ln, const Tensor& x) {
  return ln(ad::add(x, ffn(x)));
}

std::pair<Tensor, Tensor> co_attention_layer(const CoAttentionBlock& b, const Tensor& hv, const Tensor& hl) {
  const auto s = co_attention_sublayers(b, hv, hl);
  return {feed_forward_sublayer(b.ffn_v, b.ln_ff_v, s.vc), feed_forward_sublayer(b.ffn_l, b.ln_ff_l, s.lc)};
}

Tensor entity_stream_step(const EntityBlock& b, const Tensor& he, const Tensor& hvs, Matrix* attention) {
  if (empty_stream(he)) return Tensor(Matrix::Zero(0, hvs.cols()));
  if (he.cols() != hvs.cols()) throw ad::DimensionError("entity stream: width differs from vision stream");
  const Tensor hes = b.ln_sa_e(ad::add(he, b.sa_e(he, he)));
  AttentionRecord rec;
  const Tensor hec = b.ln_ca_e(ad::add(hes, b.ca_e(hes, hvs, {}, attention ? &rec : nullptr)));
  if (attention) *attention = rec.mean();
  return hec;
}

Tensor fuse_text_with_entities(const Tensor& hec, const Tensor& hlc, const Matrix& p) {
  if (p.rows() != hlc.rows() || p.cols() != (empty_stream(hec) ? 0 : hec.rows())) {
    throw ad::DimensionError("fuse_text_with_entities: P shape does not match the streams");
  }
  if (p.cols() == 0) return hlc;
  return ad::add(ad::matmul(Tensor(p), hec), hlc);
}

Matrix pad_matching_matrix(const Matrix& p) {
  Matrix out = Matrix::Zero(p.rows() + 2, p.cols());
  if (p.size() > 0) out.middleRows(1, p.rows()) = p;
  return out;
}

Matrix row_normalize(const Matrix& p) {
  Matrix out = p;
  for (Index i = 0; i < p.rows(); ++i) {
    const double s = p.row(i).sum();
    if (s != 0) out.row(i) /= s;
  }
  return out;
}

FusionOutput fusion_layer(const FusionLayer& layer, const Tensor& hv, const Tensor& hl, const Tensor& he,
                          const Matrix& p_padded, bool rk_enabled, LayerTrace* trace) {
  const auto s = co_attention_sublayers(layer.co, hv, hl, trace);
  FusionOutput out;
  out.zv = feed_forward_sublayer(layer.co.ffn_v, layer.co.ln_ff_v, s.vc);
  Tensor text = s.lc;
  if (rk_enabled && !empty_stream(he)) {
    Matrix attn;
    const Tensor hec = entity_stream_step(layer.entity, he, s.vs, trace ? &attn : nullptr);
    text = fuse_text_with_entities(hec, s.lc, p_padded);
    out.ze = feed_forward_sublayer(layer.entity.ffn_e, layer.entity.ln_ff_e, hec);
    if (trace) trace->entity_image = attn;
  } else {
    out.ze = Tensor(Matrix::Zero(0, hv.cols()));
  }
  out.zl = feed_forward_sublayer(layer.co.ffn_l, layer.co.ln_ff_l, text);
  return out;
}

FusionOutput fusion_forward(const std::vector<FusionLayer>& layers, const Tensor& hv, const Tensor& hl,
                            const Tensor& he, const Matrix& p_padded, const FusionConfig& cfg,
                            FusionTrace* trace) {
  const bool use_entities = cfg.rk_enabled && !empty_stream(he);
  if (use_entities && (p_padded.rows() != hl.rows() || p_padded.cols() != he.rows())) {
    throw ad::DimensionError("fusion_forward: P must be (N_l+2) x N_es");
  }
  const Matrix p = cfg.normalize_p ? row_normalize(p_padded) : p_padded;
  FusionOutput cur{hv, hl, use_entities ? he : Tensor(Matrix::Zero(0, hv.cols()))};
  if (trace) trace->layers.assign(layers.size(), {});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cur = fusion_layer(layers[i], cur.zv, cur.zl, cur.ze, p, use_entities, trace ? &trace->layers[i] : nullptr);
  }
  return cur;
}

}  // namespace kvlp::model
