#pragma once

#include "kvlp/data/dataset.hpp"
#include "kvlp/kge/kge_io.hpp"
#include "kvlp/objectives/losses.hpp"

namespace kvlp::obj {

// Frozen entity representations shared by alignment and fusion.
struct EntityTable {
  std::vector<std::string> ids;
  Matrix fusion_vecs;     // graph-aggregated vectors, N_e × D_e
  Matrix alignment_vecs;  // graph-aggregated, or raw TransE when requested

  Eigen::Index size() const { return fusion_vecs.rows(); }
  Matrix gather_fusion(std::span<const int> rows) const;
};

EntityTable make_entity_table(const kge::KGEArtifact& kge, const std::vector<kb::Triple>& triples,
                              bool alignment_uses_transe = false);

struct PretextOptions {
  double mlm_ratio = 0.15;
  double mim_ratio = 0.75;
  Replacement replacement = Replacement::kMaskToken;
  LossWeights weights;
  int max_negative_entities = 0;  // 0 = score against every entity
};

// All random choices for one sample of one step.
struct SamplePlan {
  MaskPlan mask;                 // token positions and patch indices
  std::vector<int> masked_ids;   // token ids after masking
  const data::Sample* itm_text = nullptr;
  bool matched = true;
  std::vector<int> alignment_rows;  // entity rows scored; empty = all
};

SamplePlan plan_sample(const data::Sample& own, const data::Sample& itm_text, bool matched,
                       const model::ModelConfig& cfg, const PretextOptions& opts, Eigen::Index n_entities,
                       Rng& rng);

// Pass 1: masked image and text through the full model for MLM and MIM.
// Pass 2: clean image with the (possibly swapped) text for ITM, plus the
// alignment losses on the uni-modal aggregate rows when AK is on.
LossComponents sample_losses(const model::Model& m, const EntityTable& entities, const data::Sample& own,
                             const SamplePlan& plan);

}  // namespace kvlp::obj
