#pragma once

#include "kvlp/data/image.hpp"
#include "kvlp/kb/corpus.hpp"
#include "kvlp/kb/knowledge_base.hpp"
#include "kvlp/kb/linker.hpp"
#include "kvlp/kb/text.hpp"
#include "kvlp/model/encoders.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace kvlp::data {

using ad::Matrix;

// One image-text pair ready for the model.
struct Sample {
  std::string id;
  kb::Split split = kb::Split::kTrain;
  Matrix patches;                           // N_v × P²C
  std::vector<int> token_ids;               // content ids, no specials
  std::vector<kb::EntityMention> mentions;  // spans over token_ids
  std::vector<int> mention_entities;        // entity-table row per mention
  std::vector<int> entity_set;              // sorted unique rows (the text's entity sequence as a set)
  Matrix p;                                 // N_l × N_es matching matrix
};

using EntityRowIndex = std::unordered_map<std::string, int>;

EntityRowIndex make_entity_row_index(const std::vector<std::string>& entity_ids);

// Tokenizes, truncates to max_text_len (dropping mentions that no longer
// fit), links entities and maps them to entity-table rows. Linked entities
// missing from the table are an error.
Sample make_sample(const std::string& id, kb::Split split, const Image& image, const std::string& text,
                   const kb::KnowledgeBase& kb, const kb::Vocabulary& vocab, const EntityRowIndex& rows,
                   const model::EncoderConfig& enc);

// Vocabulary over the training split's texts.
kb::Vocabulary build_vocabulary(const std::vector<kb::CorpusRecord>& records);

std::vector<Sample> load_samples(const std::filesystem::path& corpus_dir,
                                 const std::vector<kb::CorpusRecord>& records, const kb::KnowledgeBase& kb,
                                 const kb::Vocabulary& vocab, const EntityRowIndex& rows,
                                 const model::EncoderConfig& enc);

std::vector<const Sample*> split_view(const std::vector<Sample>& samples, kb::Split split);

}  // namespace kvlp::data
