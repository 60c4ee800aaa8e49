#pragma once

#include "kvlp/model/params.hpp"

#include <span>
#include <string>
#include <vector>

namespace kvlp::model {

struct Linear {
  Tensor w;  // in × out
  Tensor b;  // 1 × out, empty when bias-free

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, Index in, Index out, Rng& rng, bool bias = true);
  Tensor operator()(const Tensor& x) const;
  Index in_features() const { return w.rows(); }
  Index out_features() const { return w.cols(); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, Index width);
  Tensor operator()(const Tensor& x) const;
};

// Per-head attention weights of one call; rows are queries.
struct AttentionRecord {
  std::vector<Matrix> heads;
  Matrix mean() const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, Index width, int heads, Rng& rng);

  // softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated, then the
  // output projection. Keys with key_valid[j] == false receive zero weight.
  Tensor operator()(const Tensor& query_in, const Tensor& kv_in, std::span<const bool> key_valid = {},
                    AttentionRecord* record = nullptr) const;
};

struct FeedForward {
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, Index width, Index hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

enum class NormOrder { kPre, kPost };

struct TransformerLayer {
  MultiHeadAttention attn;
  LayerNorm ln1, ln2;
  FeedForward ffn;
  NormOrder order = NormOrder::kPre;

  TransformerLayer() = default;
  TransformerLayer(ParamStore& ps, const std::string& name, Index width, int heads, Index hidden,
                   NormOrder order, Rng& rng);
  Tensor operator()(const Tensor& x, std::span<const bool> key_valid = {},
                    AttentionRecord* record = nullptr) const;
};

// Runs x through the stack; zero layers returns x unchanged.
Tensor encode(const Tensor& x, const std::vector<TransformerLayer>& layers,
              std::span<const bool> key_valid = {});

}  // namespace kvlp::model
