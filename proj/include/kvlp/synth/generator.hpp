#pragma once

#include "kvlp/data/image.hpp"
#include "kvlp/kb/corpus.hpp"
#include "kvlp/kb/knowledge_base.hpp"
#include "kvlp/util/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace kvlp::synth {

struct GeneratorConfig {
  int n_entities = 40;      // entities that appear in the corpus
  int n_distractors = 8;    // KB-only entities, never mentioned
  int n_relations = 3;
  double triple_density = 0.05;
  int n_pairs = 500;
  int entities_per_pair = 2;
  int image_size = 32;
  int glyph_cell = 8;       // glyphs are aligned to cells of this size
  int n_filler = 50;
  int filler_min = 12;
  int filler_max = 20;
  std::uint64_t seed = 1;
};

void validate(const GeneratorConfig& cfg);

struct SyntheticPair {
  std::string id;
  data::Image image;
  std::string text;
  std::vector<std::string> gold_entities;
  kb::Split split = kb::Split::kTrain;

  bool operator==(const SyntheticPair&) const = default;
};

// Entities named by unique pseudo-words (1–3 synonyms each, no word shared
// between surface forms); triples sampled over ordered pairs × relations.
kb::KnowledgeBase generate_kb(const GeneratorConfig& cfg);

// Ids of the entities eligible for corpus mentions (distractors excluded).
std::vector<std::string> corpus_entity_ids(const kb::KnowledgeBase& kb, const GeneratorConfig& cfg);

// Image: superposition of each entity's block glyph. Text: a template naming
// every entity (random synonym) followed by shuffled filler words.
SyntheticPair generate_pair(const kb::KnowledgeBase& kb, const std::vector<std::string>& entity_subset,
                            const GeneratorConfig& cfg, Rng& rng);

// The glyph of one entity alone on a blank canvas.
data::Image entity_glyph(const std::string& entity_id, const GeneratorConfig& cfg);

const std::vector<std::string>& filler_words();

struct SyntheticCorpus {
  kb::KnowledgeBase kb;
  std::vector<SyntheticPair> pairs;  // splits 80/10/10 in pair order
};

SyntheticCorpus generate_corpus(const GeneratorConfig& cfg);

// Writes kb/{entities,relations,triples}.tsv, images/<id>.pgm, corpus.jsonl
// and manifest.json under `dir`.
void write_corpus_dir(const SyntheticCorpus& corpus, const GeneratorConfig& cfg,
                      const std::filesystem::path& dir);

}  // namespace kvlp::synth
