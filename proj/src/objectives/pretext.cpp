#include "kvlp/objectives/pretext.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/kge/gat.hpp"

#include <algorithm>

namespace kvlp::obj {

Matrix EntityTable::gather_fusion(std::span<const int> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), fusion_vecs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = fusion_vecs.row(rows[i]);
  return out;
}

EntityTable make_entity_table(const kge::KGEArtifact& kge, const std::vector<kb::Triple>& triples,
                              bool alignment_uses_transe) {
  EntityTable t;
  t.ids = kge.embeddings.entity_ids;
  const auto indexed = kge::index_triples(triples, kge.embeddings.entity_ids, kge.embeddings.relation_ids);
  t.fusion_vecs = kge::gat_aggregate(kge.embeddings, indexed, kge.gat).aggregated;
  t.alignment_vecs = alignment_uses_transe ? kge.embeddings.entity_vecs : t.fusion_vecs;
  return t;
}

SamplePlan plan_sample(const data::Sample& own, const data::Sample& itm_text, bool matched,
                       const model::ModelConfig& cfg, const PretextOptions& opts, Eigen::Index n_entities,
                       Rng& rng) {
  SamplePlan plan;
  const int n_tokens = static_cast<int>(own.token_ids.size());
  plan.mask = cfg.knowledge.lk ? knowledge_mask(n_tokens, own.mentions, opts.mlm_ratio, rng)
                               : random_token_mask(n_tokens, opts.mlm_ratio, rng);
  plan.mask.replacement = opts.replacement;
  plan.mask.patch_indices = patch_mask(static_cast<int>(own.patches.rows()), opts.mim_ratio, rng);
  plan.masked_ids = apply_token_mask(own.token_ids, plan.mask, cfg.encoder.vocab_size, rng);
  plan.itm_text = &itm_text;
  plan.matched = matched;
  if (cfg.knowledge.ak && opts.max_negative_entities > 0) {
    std::vector<int> positives = own.entity_set;
    positives.insert(positives.end(), itm_text.entity_set.begin(), itm_text.entity_set.end());
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
    std::vector<int> negatives;
    for (int e = 0; e < n_entities; ++e) {
      if (!std::binary_search(positives.begin(), positives.end(), e)) negatives.push_back(e);
    }
    if (static_cast<int>(negatives.size()) > opts.max_negative_entities) {
      auto pick = sample_without_replacement(rng, static_cast<int>(negatives.size()), opts.max_negative_entities);
      std::vector<int> chosen;
      for (int k : pick) chosen.push_back(negatives[static_cast<std::size_t>(k)]);
      negatives = chosen;
    }
    plan.alignment_rows = positives;
    plan.alignment_rows.insert(plan.alignment_rows.end(), negatives.begin(), negatives.end());
    std::sort(plan.alignment_rows.begin(), plan.alignment_rows.end());
  }
  return plan;
}

namespace {

Matrix labels_over(const std::vector<int>& rows, const std::vector<int>& entity_set, Eigen::Index n_entities) {
  if (rows.empty()) return entity_labels(entity_set, n_entities);
  Matrix y = Matrix::Zero(1, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(0, static_cast<Eigen::Index>(i)) = std::binary_search(entity_set.begin(), entity_set.end(), rows[i]) ? 1 : 0;
  }
  return y;
}

Matrix rows_of(const Matrix& m, const std::vector<int>& rows) {
  if (rows.empty()) return m;
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

LossComponents sample_losses(const model::Model& m, const EntityTable& entities, const data::Sample& own,
                             const SamplePlan& plan) {
  const auto& cfg = m.config();
  LossComponents out;

  const auto masked = m.forward(own.patches, plan.masked_ids, entities.gather_fusion(own.mention_entities), own.p,
                                plan.mask.patch_indices);
  std::vector<int> targets;
  for (int pos : plan.mask.token_positions) targets.push_back(own.token_ids[static_cast<std::size_t>(pos)]);
  out.mlm = mlm_loss(masked.fused.zl, plan.mask.token_positions, targets, m.heads().mlm);
  out.mim = mim_loss(masked.fused.zv, plan.mask.patch_indices, own.patches, m.heads().mim);

  const data::Sample& text = plan.itm_text ? *plan.itm_text : own;
  const Tensor hv = m.encoders().encode_image(own.patches);
  const Tensor hl = m.encoders().encode_text(text.token_ids);
  const auto fused = m.fuse(hv, hl, entities.gather_fusion(text.mention_entities), text.p);
  out.itm = itm_loss(m.itm_logits(fused), plan.matched);

  if (cfg.knowledge.ak) {
    const Matrix e = rows_of(entities.alignment_vecs, plan.alignment_rows);
    const auto scores =
        alignment_scores(ad::slice_rows(hv, 0, 1), ad::slice_rows(hl, 0, 1), e, m.heads().w_vk, m.heads().w_lk);
    out.l_vk = alignment_loss_from_logits(scores.logits_v, labels_over(plan.alignment_rows, own.entity_set, e.rows()));
    out.l_lk =
        alignment_loss_from_logits(scores.logits_l, labels_over(plan.alignment_rows, text.entity_set, e.rows()));
  }
  return out;
}

}  // namespace kvlp::obj
