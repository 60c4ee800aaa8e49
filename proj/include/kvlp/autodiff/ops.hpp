#pragma once

#include "kvlp/autodiff/tensor.hpp"

#include <span>
#include <vector>

namespace kvlp::ad {

// Elementwise sum. `b` may also be a 1×cols row vector, broadcast over rows
// (bias addition); no other broadcasting is supported.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Index begin, Index count);
Tensor slice_cols(const Tensor& a, Index begin, Index count);

// Embedding lookup: row i of the result is table row ids[i].
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

Tensor sigmoid(const Tensor& a);
// Exact (erf-based) GELU.
Tensor gelu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Real slope);

// Softmax along `axis` (0 = down columns, 1 = across rows).
Tensor softmax(const Tensor& x, int axis = 1);
// Row softmax where keys with key_valid[j] == false get zero weight, exactly
// as if their logits were -inf. Empty span means all keys valid.
Tensor softmax_rows(const Tensor& x, std::span<const bool> key_valid = {});

// Row-wise normalization with a 1×cols gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor l2_norm(const Tensor& a);

// Mean over all elements of (pred - target)^2.
Tensor mse(const Tensor& pred, const Tensor& target);
// Summed binary cross-entropy on probabilities in (0,1); targets in {0,1}.
Tensor binary_cross_entropy(const Tensor& probs, const Tensor& targets);
// Same quantity computed from logits without forming the probabilities.
Tensor binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets);
// Mean over rows of -log softmax(logits)[row, target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

}  // namespace kvlp::ad
