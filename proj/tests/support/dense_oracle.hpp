#pragma once

// Loop-level reference implementations of the model's building blocks. They
// read parameter values from the model structs but share no arithmetic with
// the autodiff ops.

#include "kvlp/model/fusion.hpp"
#include "kvlp/model/layers.hpp"

#include <cmath>
#include <vector>

namespace kvlp::testing {

using ad::Matrix;

inline Matrix dense_linear(const Matrix& x, const model::Linear& l) {
  const Matrix& w = l.w.value();
  Matrix y(x.rows(), w.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = l.b.node() ? l.b.value()(0, j) : 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) s += x(i, k) * w(k, j);
      y(i, j) = s;
    }
  }
  return y;
}

inline Matrix dense_softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = -1e300;
    for (Eigen::Index j = 0; j < x.cols(); ++j) m = std::max(m, x(i, j));
    double z = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) z += std::exp(x(i, j) - m);
    for (Eigen::Index j = 0; j < x.cols(); ++j) y(i, j) = std::exp(x(i, j) - m) / z;
  }
  return y;
}

inline Matrix dense_layer_norm(const Matrix& x, const model::LayerNorm& ln, double eps = 1e-5) {
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mu = 0, var = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mu += x(i, j) / n;
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mu) * (x(i, j) - mu) / n;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      y(i, j) = (x(i, j) - mu) / std::sqrt(var + eps) * ln.gain.value()(0, j) + ln.bias.value()(0, j);
    }
  }
  return y;
}

inline Matrix dense_gelu(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) y.data()[i] = 0.5 * x.data()[i] * (1 + std::erf(x.data()[i] / std::sqrt(2.0)));
  return y;
}

// softmax(Q_h K_h^T / sqrt(d_h)) V_h per head, concatenated, output projection.
inline Matrix dense_attention(const Matrix& q_in, const Matrix& kv_in, const model::MultiHeadAttention& a,
                              std::vector<Matrix>* weights = nullptr) {
  const Matrix Q = dense_linear(q_in, a.q), K = dense_linear(kv_in, a.k), V = dense_linear(kv_in, a.v);
  const Eigen::Index dh = Q.cols() / a.heads;
  Matrix cat(Q.rows(), Q.cols());
  if (weights) weights->clear();
  for (int h = 0; h < a.heads; ++h) {
    Matrix logits(Q.rows(), K.rows());
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
      for (Eigen::Index j = 0; j < K.rows(); ++j) {
        double s = 0;
        for (Eigen::Index c = 0; c < dh; ++c) s += Q(i, h * dh + c) * K(j, h * dh + c);
        logits(i, j) = s / std::sqrt(static_cast<double>(dh));
      }
    }
    const Matrix w = dense_softmax_rows(logits);
    if (weights) weights->push_back(w);
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
      for (Eigen::Index c = 0; c < dh; ++c) {
        double s = 0;
        for (Eigen::Index j = 0; j < K.rows(); ++j) s += w(i, j) * V(j, h * dh + c);
        cat(i, h * dh + c) = s;
      }
    }
  }
  return dense_linear(cat, a.o);
}

inline Matrix dense_ffn(const Matrix& x, const model::FeedForward& f) {
  return dense_linear(dense_gelu(dense_linear(x, f.fc1)), f.fc2);
}

inline Matrix dense_transformer_layer(const Matrix& x, const model::TransformerLayer& l) {
  if (l.order == model::NormOrder::kPre) {
    const Matrix n1 = dense_layer_norm(x, l.ln1);
    const Matrix h = x + dense_attention(n1, n1, l.attn);
    return h + dense_ffn(dense_layer_norm(h, l.ln2), l.ffn);
  }
  const Matrix h = dense_layer_norm(x + dense_attention(x, x, l.attn), l.ln1);
  return dense_layer_norm(h + dense_ffn(h, l.ffn), l.ln2);
}

inline Matrix dense_matmul(const Matrix& a, const Matrix& b) {
  Matrix y = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      for (Eigen::Index j = 0; j < b.cols(); ++j) y(i, j) += a(i, k) * b(k, j);
  return y;
}

struct DenseFusionOut {
  Matrix zv, zl, ze;
};

// One fusion layer written out step by step: self-attention, cross-attention,
// entity stream, text fused with its matched entities, three feed-forward sub-layers.
inline DenseFusionOut dense_fusion_layer(const model::FusionLayer& f, const Matrix& hv, const Matrix& hl,
                                         const Matrix& he, const Matrix& p_padded, bool rk) {
  const auto& c = f.co;
  const Matrix hvs = dense_layer_norm(hv + dense_attention(hv, hv, c.sa_v), c.ln_sa_v);
  const Matrix hls = dense_layer_norm(hl + dense_attention(hl, hl, c.sa_l), c.ln_sa_l);
  const Matrix hvc = dense_layer_norm(hvs + dense_attention(hvs, hls, c.ca_v), c.ln_ca_v);
  const Matrix hlc = dense_layer_norm(hls + dense_attention(hls, hvs, c.ca_l), c.ln_ca_l);
  DenseFusionOut out;
  out.zv = dense_layer_norm(hvc + dense_ffn(hvc, c.ffn_v), c.ln_ff_v);
  Matrix text = hlc;
  if (rk && he.rows() > 0) {
    const auto& e = f.entity;
    const Matrix hes = dense_layer_norm(he + dense_attention(he, he, e.sa_e), e.ln_sa_e);
    const Matrix hec = dense_layer_norm(hes + dense_attention(hes, hvs, e.ca_e), e.ln_ca_e);
    text = dense_matmul(p_padded, hec) + hlc;
    out.ze = dense_layer_norm(hec + dense_ffn(hec, e.ffn_e), e.ln_ff_e);
  } else {
    out.ze = Matrix::Zero(0, hv.cols());
  }
  out.zl = dense_layer_norm(text + dense_ffn(text, c.ffn_l), c.ln_ff_l);
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace kvlp::testing
