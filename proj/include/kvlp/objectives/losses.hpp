#pragma once

#include "kvlp/model/model.hpp"
#include "kvlp/objectives/masking.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace kvlp::obj {

using ad::Matrix;
using ad::Tensor;

// Logits e_i^T W h for every entity row of `entity_vecs`: 1 × N_e.
Tensor alignment_logits(const Tensor& h, const Matrix& entity_vecs, const Tensor& w);

struct AlignmentScores {
  Tensor logits_v, logits_l;  // 1 × N_e
  Matrix probs_v() const;
  Matrix probs_l() const;
};

// p^v from the image aggregate row h_I^v, p^l from the text aggregate row h_T^l.
AlignmentScores alignment_scores(const Tensor& h_image, const Tensor& h_text, const Matrix& entity_vecs,
                                 const Tensor& w_vk, const Tensor& w_lk);

// 1 × N_e indicator of `entity_set` (entity row indices).
Matrix entity_labels(std::span<const int> entity_set, Eigen::Index n_entities);

// Summed binary cross-entropy of probabilities against labels.
Tensor alignment_loss(const Tensor& probs, const Matrix& labels);
// Same quantity from logits; used in training.
Tensor alignment_loss_from_logits(const Tensor& logits, const Matrix& labels);

// Cross-entropy over masked content positions of Z^l (row = position + 1).
// An empty plan yields 0 and bumps mlm_empty_mask_count().
Tensor mlm_loss(const Tensor& zl, std::span<const int> positions, std::span<const int> targets,
                const model::Linear& head);
std::size_t mlm_empty_mask_count();

// Mean squared error between the head's reconstruction of masked patch rows
// of Z^v (row = index + 1) and the original pixels.
Tensor mim_loss(const Tensor& zv, std::span<const int> patch_indices, const Matrix& patches,
                const model::Linear& head);

// Two-way cross-entropy on 1 × 2 ITM logits; class 1 = matched.
Tensor itm_loss(const Tensor& logits, bool matched);

struct LossComponents {
  Tensor mlm, mim, itm, l_vk, l_lk;  // null when not computed
};

struct LossWeights {
  double mlm = 1, mim = 1, itm = 1, l_vk = 1, l_lk = 1;
};

// Σ w_i · L_i over the computed components; alignment terms only when AK is on.
Tensor total_loss(const LossComponents& c, const LossWeights& w, const model::KnowledgeToggles& k);

}  // namespace kvlp::obj
