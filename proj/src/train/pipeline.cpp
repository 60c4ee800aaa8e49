#include "kvlp/train/pipeline.hpp"

#include "kvlp/kb/corpus.hpp"
#include "kvlp/kb/linker.hpp"
#include "kvlp/kb/text.hpp"
#include "kvlp/kge/gat.hpp"
#include "kvlp/synth/generator.hpp"
#include "kvlp/util/config.hpp"

namespace kvlp::train {

void generate_corpus(const Settings& s, const std::filesystem::path& out) {
  synth::write_corpus_dir(synth::generate_corpus(s.generator), s.generator, out);
}

kb::KnowledgeBase extract_kb(const Settings& s, const std::filesystem::path& out) {
  const std::filesystem::path corpus(s.corpus_dir);
  if (!std::filesystem::exists(corpus / "corpus.jsonl")) throw ConfigError("no corpus.jsonl in " + corpus.string());
  const auto full = kb::load_kb(corpus / "kb");
  std::vector<kb::LinkedText> linked;
  for (const auto& r : kb::read_corpus(corpus / "corpus.jsonl")) linked.push_back(kb::link_entities(kb::tokenize(r.text), full));
  auto restricted = kb::restrict_kb(full, kb::corpus_entity_set(linked));
  kb::save_kb(restricted, out);
  return restricted;
}

kge::KGEArtifact train_kge(const Settings& s, const std::filesystem::path& out) {
  const std::filesystem::path dir(s.kb_dir);
  if (!std::filesystem::exists(dir / "entities.tsv")) throw ConfigError("no knowledge base in " + dir.string());
  const auto kb = kb::load_kb(dir);
  kge::KGEArtifact a;
  a.embeddings = kge::train_transe(kb, s.transe);
  a.gat = kge::GraphAttentionParams::identity(s.transe.dim, s.seed);
  kge::save_kge(a, out);
  return a;
}

}  // namespace kvlp::train
