#include "kvlp/data/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvlp::data {

EntityRowIndex make_entity_row_index(const std::vector<std::string>& entity_ids) {
  EntityRowIndex idx;
  for (std::size_t i = 0; i < entity_ids.size(); ++i) idx.emplace(entity_ids[i], static_cast<int>(i));
  return idx;
}

Sample make_sample(const std::string& id, kb::Split split, const Image& image, const std::string& text,
                   const kb::KnowledgeBase& kb, const kb::Vocabulary& vocab, const EntityRowIndex& rows,
                   const model::EncoderConfig& enc) {
  Sample s;
  s.id = id;
  s.split = split;
  const Image sized = (image.height == enc.image_height && image.width == enc.image_width)
                          ? image
                          : resize_nearest(image, enc.image_height, enc.image_width);
  if (sized.channels != enc.channels) throw std::invalid_argument(id + ": image channel count mismatch");
  s.patches = to_patches(sized, enc.patch);

  auto tokens = kb::tokenize(text);
  if (tokens.size() > static_cast<std::size_t>(enc.max_text_len)) tokens.resize(static_cast<std::size_t>(enc.max_text_len));
  const kb::LinkedText linked = kb::link_entities(tokens, kb);
  s.token_ids = vocab.encode(linked.tokens);
  for (const auto& m : linked.entities) {
    auto it = rows.find(m.entity_id);
    if (it == rows.end()) throw std::out_of_range(id + ": linked entity " + m.entity_id + " has no embedding");
    s.mentions.push_back(m);
    s.mention_entities.push_back(it->second);
  }
  s.entity_set = s.mention_entities;
  std::sort(s.entity_set.begin(), s.entity_set.end());
  s.entity_set.erase(std::unique(s.entity_set.begin(), s.entity_set.end()), s.entity_set.end());
  s.p = kb::build_matching_matrix(linked);
  return s;
}

kb::Vocabulary build_vocabulary(const std::vector<kb::CorpusRecord>& records) {
  std::vector<std::vector<std::string>> texts;
  for (const auto& r : records) {
    if (r.split == kb::Split::kTrain) texts.push_back(kb::tokenize(r.text));
  }
  return kb::Vocabulary::build(texts);
}

std::vector<Sample> load_samples(const std::filesystem::path& corpus_dir,
                                 const std::vector<kb::CorpusRecord>& records, const kb::KnowledgeBase& kb,
                                 const kb::Vocabulary& vocab, const EntityRowIndex& rows,
                                 const model::EncoderConfig& enc) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(make_sample(r.id, r.split, read_image(corpus_dir / r.image), r.text, kb, vocab, rows, enc));
  }
  return out;
}

std::vector<const Sample*> split_view(const std::vector<Sample>& samples, kb::Split split) {
  std::vector<const Sample*> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(&s);
  }
  return out;
}

}  // namespace kvlp::data
