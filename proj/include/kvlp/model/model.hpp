#pragma once

#include "kvlp/model/encoders.hpp"
#include "kvlp/model/fusion.hpp"

#include <cstdint>
#include <span>

namespace kvlp::model {

// The three knowledge injection designs, each switchable for ablation.
struct KnowledgeToggles {
  bool ak = true;  // alignment losses against entity embeddings
  bool rk = true;  // entity stream inside fusion
  bool lk = true;  // entity-span masking for MLM
  bool operator==(const KnowledgeToggles&) const = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;
  int entity_dim = 32;
  KnowledgeToggles knowledge;
};

struct TaskHeads {
  Linear mlm;         // D → V
  Linear mim;         // D → P²C
  Linear itm_hidden;  // 2D → D
  Linear itm_out;     // D → 2, class 1 = matched
  Tensor w_vk;        // D_e × D
  Tensor w_lk;        // D_e × D
};

struct ForwardResult {
  Tensor hv, hl;  // uni-modal encoder outputs
  FusionOutput fused;
};

// All trainable state of one vision-language model. Not copyable: the
// layer structs alias leaves of the parameter store.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const UniEncoders& encoders() const { return encoders_; }
  const std::vector<FusionLayer>& fusion_layers() const { return fusion_; }
  const TaskHeads& heads() const { return heads_; }
  const Tensor& entity_proj() const { return entity_proj_; }

  // Frozen entity rows (N_es × D_e) mapped into the fusion width.
  Tensor entity_stream_input(const Matrix& entity_rows) const;

  // Encoders then fusion. `entity_rows` may have zero rows; `p` is the
  // unpadded N_l × N_es matching matrix.
  ForwardResult forward(const Matrix& patches, std::span<const int> token_ids, const Matrix& entity_rows,
                        const Matrix& p, std::span<const int> masked_patches = {},
                        FusionTrace* trace = nullptr) const;

  // Fusion only, over cached encoder outputs.
  FusionOutput fuse(const Tensor& hv, const Tensor& hl, const Matrix& entity_rows, const Matrix& p,
                    FusionTrace* trace = nullptr) const;

  // ITM logits (1 × 2) over [Z^v row 0 ; Z^l row 0].
  Tensor itm_logits(const FusionOutput& fused) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  UniEncoders encoders_;
  std::vector<FusionLayer> fusion_;
  Tensor entity_proj_;
  TaskHeads heads_;
};

}  // namespace kvlp::model
