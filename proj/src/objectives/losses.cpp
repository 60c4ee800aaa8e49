#include "kvlp/objectives/losses.hpp"

#include "kvlp/autodiff/ops.hpp"

#include <atomic>

namespace kvlp::obj {

namespace {
std::atomic<std::size_t> g_empty_mlm{0};

Matrix sigmoid_of(const Tensor& t) { return (1.0 / (1.0 + (-t.value().array()).exp())).matrix(); }
}  // namespace

Tensor alignment_logits(const Tensor& h, const Matrix& entity_vecs, const Tensor& w) {
  if (h.rows() != 1 || h.cols() != w.cols() || entity_vecs.cols() != w.rows()) {
    throw ad::DimensionError("alignment_logits: expected h 1xD, W D_e x D, E N_e x D_e");
  }
  return ad::matmul(ad::matmul(h, ad::transpose(w)), Tensor(Matrix(entity_vecs.transpose())));
}

Matrix AlignmentScores::probs_v() const { return sigmoid_of(logits_v); }
Matrix AlignmentScores::probs_l() const { return sigmoid_of(logits_l); }

AlignmentScores alignment_scores(const Tensor& h_image, const Tensor& h_text, const Matrix& entity_vecs,
                                 const Tensor& w_vk, const Tensor& w_lk) {
  return {alignment_logits(h_image, entity_vecs, w_vk), alignment_logits(h_text, entity_vecs, w_lk)};
}

Matrix entity_labels(std::span<const int> entity_set, Eigen::Index n_entities) {
  Matrix y = Matrix::Zero(1, n_entities);
  for (int e : entity_set) {
    if (e < 0 || e >= n_entities) throw std::out_of_range("entity_labels: index out of range");
    y(0, e) = 1;
  }
  return y;
}

Tensor alignment_loss(const Tensor& probs, const Matrix& labels) {
  return ad::binary_cross_entropy(probs, Tensor(labels));
}

Tensor alignment_loss_from_logits(const Tensor& logits, const Matrix& labels) {
  return ad::binary_cross_entropy_with_logits(logits, Tensor(labels));
}

Tensor mlm_loss(const Tensor& zl, std::span<const int> positions, std::span<const int> targets,
                const model::Linear& head) {
  if (positions.size() != targets.size()) throw std::invalid_argument("mlm_loss: positions/targets differ");
  if (positions.empty()) {
    ++g_empty_mlm;
    return Tensor::scalar(0.0);
  }
  std::vector<int> rows(positions.begin(), positions.end());
  for (int& r : rows) {
    if (r < 0 || r + 3 > zl.rows()) throw std::out_of_range("mlm_loss: position outside the text");
    ++r;
  }
  return ad::cross_entropy(head(ad::gather_rows(zl, rows)), targets);
}

std::size_t mlm_empty_mask_count() { return g_empty_mlm.load(); }

Tensor mim_loss(const Tensor& zv, std::span<const int> patch_indices, const Matrix& patches,
                const model::Linear& head) {
  if (patch_indices.empty()) return Tensor::scalar(0.0);
  std::vector<int> rows(patch_indices.begin(), patch_indices.end());
  Matrix target(static_cast<Eigen::Index>(rows.size()), patches.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= patches.rows()) throw std::out_of_range("mim_loss: patch index");
    target.row(static_cast<Eigen::Index>(i)) = patches.row(rows[i]);
    ++rows[i];
  }
  return ad::mse(head(ad::gather_rows(zv, rows)), Tensor(target));
}

Tensor itm_loss(const Tensor& logits, bool matched) {
  const int target = matched ? 1 : 0;
  return ad::cross_entropy(logits, std::span<const int>(&target, 1));
}

Tensor total_loss(const LossComponents& c, const LossWeights& w, const model::KnowledgeToggles& k) {
  Tensor total = Tensor::scalar(0.0);
  auto acc = [&](const Tensor& t, double weight) {
    if (t.node() && weight != 0.0) total = ad::add(total, ad::scale(t, weight));
  };
  acc(c.mlm, w.mlm);
  acc(c.mim, w.mim);
  acc(c.itm, w.itm);
  if (k.ak) {
    acc(c.l_vk, w.l_vk);
    acc(c.l_lk, w.l_lk);
  }
  return total;
}

}  // namespace kvlp::obj
