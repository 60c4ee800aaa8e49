#include "kvlp/model/model.hpp"

#include "kvlp/autodiff/ops.hpp"

namespace kvlp::model {

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.fusion.width != cfg.encoder.width) throw std::invalid_argument("fusion width must equal encoder width");
  if (cfg.entity_dim <= 0) throw std::invalid_argument("entity_dim must be positive");
  cfg_.fusion.rk_enabled = cfg.knowledge.rk;
  Rng rng = substream(seed, "model-init");
  encoders_ = UniEncoders(params_, cfg_.encoder, rng);
  for (int l = 0; l < cfg_.fusion.layers; ++l) {
    fusion_.emplace_back(params_, "fusion.layer" + std::to_string(l), cfg_.fusion, rng);
  }
  const Index d = cfg_.encoder.width, de = cfg_.entity_dim;
  entity_proj_ = params_.add("entity.proj", xavier_uniform(de, d, rng), true);
  heads_.mlm = Linear(params_, "head.mlm", d, cfg_.encoder.vocab_size, rng);
  heads_.mim = Linear(params_, "head.mim", d, cfg_.encoder.patch_dim(), rng);
  heads_.itm_hidden = Linear(params_, "head.itm_hidden", 2 * d, d, rng);
  heads_.itm_out = Linear(params_, "head.itm_out", d, 2, rng);
  heads_.w_vk = params_.add("align.w_vk", xavier_uniform(de, d, rng), true);
  heads_.w_lk = params_.add("align.w_lk", xavier_uniform(de, d, rng), true);
}

Tensor Model::entity_stream_input(const Matrix& entity_rows) const {
  if (entity_rows.rows() == 0) return Tensor(Matrix::Zero(0, cfg_.encoder.width));
  if (entity_rows.cols() != entity_proj_.rows()) {
    throw ad::DimensionError("entity rows width does not match entity_dim");
  }
  return ad::matmul(Tensor(entity_rows), entity_proj_);
}

FusionOutput Model::fuse(const Tensor& hv, const Tensor& hl, const Matrix& entity_rows, const Matrix& p,
                         FusionTrace* trace) const {
  const bool use = cfg_.knowledge.rk && entity_rows.rows() > 0;
  const Tensor he = use ? entity_stream_input(entity_rows) : Tensor(Matrix::Zero(0, cfg_.encoder.width));
  return fusion_forward(fusion_, hv, hl, he, use ? pad_matching_matrix(p) : Matrix(hl.rows(), 0), cfg_.fusion,
                        trace);
}

ForwardResult Model::forward(const Matrix& patches, std::span<const int> token_ids, const Matrix& entity_rows,
                             const Matrix& p, std::span<const int> masked_patches, FusionTrace* trace) const {
  ForwardResult r;
  r.hv = encoders_.encode_image(patches, masked_patches);
  r.hl = encoders_.encode_text(token_ids);
  r.fused = fuse(r.hv, r.hl, entity_rows, p, trace);
  return r;
}

Tensor Model::itm_logits(const FusionOutput& fused) const {
  const Tensor pooled = ad::concat_cols({ad::slice_rows(fused.zv, 0, 1), ad::slice_rows(fused.zl, 0, 1)});
  return heads_.itm_out(ad::gelu(heads_.itm_hidden(pooled)));
}

}  // namespace kvlp::model
