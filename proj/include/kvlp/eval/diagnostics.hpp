#pragma once

#include "kvlp/data/dataset.hpp"
#include "kvlp/kb/text.hpp"
#include "kvlp/model/model.hpp"
#include "kvlp/objectives/pretext.hpp"

#include <filesystem>

namespace kvlp::eval {

using ad::Matrix;

struct DiagnosticsSummary {
  int n_entities = 0;     // rows of p_v.csv / p_l.csv
  int text_len = 0;       // N_l including [CLS] and [SEP]
  int n_mentions = 0;     // N_es
  int n_visual = 0;       // N_v + 1 (patches and the class token)
  int fusion_layers = 0;
};

// Writes into `out`:
//   p_v.csv, p_l.csv                 entity,p over every entity (sigmoid scores)
//   text_image_layer<k>.csv          subword × visual-token attention (head mean)
//   entity_image_layer<k>.csv        mention × visual-token attention (head mean)
//   embeddings.csv                   uni-modal and fused aggregate rows
// Row labels come from the vocabulary and entity ids. Values use %.17g.
DiagnosticsSummary dump_diagnostics(const model::Model& m, const obj::EntityTable& entities,
                                    const data::Sample& sample, const kb::Vocabulary& vocab,
                                    const std::filesystem::path& out);

}  // namespace kvlp::eval
