#include "kvlp/model/layers.hpp"

#include "kvlp/autodiff/ops.hpp"

#include <cmath>

namespace kvlp::model {

Linear::Linear(ParamStore& ps, const std::string& name, Index in, Index out, Rng& rng, bool bias) {
  w = ps.add(name + ".w", xavier_uniform(in, out, rng), true);
  if (bias) b = ps.add(name + ".b", Matrix::Zero(1, out), false);
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.cols() != w.rows()) throw ad::DimensionError("linear: input width does not match weight rows");
  Tensor y = ad::matmul(x, w);
  return b.node() ? ad::add(y, b) : y;
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, Index width) {
  gain = ps.add(name + ".gain", Matrix::Ones(1, width), false);
  bias = ps.add(name + ".bias", Matrix::Zero(1, width), false);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ad::layer_norm(x, gain, bias); }

Matrix AttentionRecord::mean() const {
  if (heads.empty()) return {};
  Matrix m = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) m += heads[h];
  return m / static_cast<double>(heads.size());
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name, Index width, int n_heads,
                                       Rng& rng)
    : heads(n_heads) {
  if (n_heads <= 0 || width % n_heads != 0) {
    throw std::invalid_argument("attention width must be divisible by the head count");
  }
  q = Linear(ps, name + ".q", width, width, rng);
  k = Linear(ps, name + ".k", width, width, rng);
  v = Linear(ps, name + ".v", width, width, rng);
  o = Linear(ps, name + ".o", width, width, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& query_in, const Tensor& kv_in,
                                      std::span<const bool> key_valid, AttentionRecord* record) const {
  if (query_in.cols() != kv_in.cols()) throw ad::DimensionError("attention: stream widths differ");
  const Tensor Q = q(query_in), K = k(kv_in), V = v(kv_in);
  const Index dh = Q.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  if (record) record->heads.clear();
  std::vector<Tensor> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? Q : ad::slice_cols(Q, h * dh, dh);
    const Tensor kh = heads == 1 ? K : ad::slice_cols(K, h * dh, dh);
    const Tensor vh = heads == 1 ? V : ad::slice_cols(V, h * dh, dh);
    const Tensor a = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), s), key_valid);
    if (record) record->heads.push_back(a.value());
    outs.push_back(ad::matmul(a, vh));
  }
  return o(heads == 1 ? outs.front() : ad::concat_cols(outs));
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, Index width, Index hidden, Rng& rng)
    : fc1(ps, name + ".fc1", width, hidden, rng), fc2(ps, name + ".fc2", hidden, width, rng) {}

Tensor FeedForward::operator()(const Tensor& x) const { return fc2(ad::gelu(fc1(x))); }

TransformerLayer::TransformerLayer(ParamStore& ps, const std::string& name, Index width, int n_heads,
                                   Index hidden, NormOrder norm_order, Rng& rng)
    : attn(ps, name + ".attn", width, n_heads, rng),
      ln1(ps, name + ".ln1", width),
      ln2(ps, name + ".ln2", width),
      ffn(ps, name + ".ffn", width, hidden, rng),
      order(norm_order) {}

Tensor TransformerLayer::operator()(const Tensor& x, std::span<const bool> key_valid,
                                    AttentionRecord* record) const {
  if (order == NormOrder::kPre) {
    const Tensor n1 = ln1(x);
    const Tensor h = ad::add(x, attn(n1, n1, key_valid, record));
    return ad::add(h, ffn(ln2(h)));
  }
  const Tensor h = ln1(ad::add(x, attn(x, x, key_valid, record)));
  return ln2(ad::add(h, ffn(h)));
}

Tensor encode(const Tensor& x, const std::vector<TransformerLayer>& layers, std::span<const bool> key_valid) {
  Tensor h = x;
  for (const auto& layer : layers) h = layer(h, key_valid);
  return h;
}

}  // namespace kvlp::model
