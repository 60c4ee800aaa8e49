#include "kvlp/kb/linker.hpp"

#include "kvlp/kb/text.hpp"

#include <algorithm>

namespace kvlp::kb {

LinkedText link_entities(std::vector<std::string> tokens, const KnowledgeBase& kb) {
  LinkedText out;
  out.tokens = std::move(tokens);
  const auto& lex = kb.lexicon();
  const std::size_t n = out.tokens.size();
  std::size_t i = 0;
  while (i < n) {
    bool matched = false;
    const std::size_t longest = std::min(kb.max_surface_tokens(), n - i);
    for (std::size_t len = longest; len >= 1; --len) {
      std::string key = out.tokens[i];
      for (std::size_t k = 1; k < len; ++k) key += ' ' + out.tokens[i + k];
      auto it = lex.find(key);
      if (it != lex.end()) {
        out.entities.push_back({it->second, i, i + len});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

BinaryMatrix build_matching_matrix(const LinkedText& linked) {
  const auto rows = static_cast<Eigen::Index>(linked.num_tokens());
  const auto cols = static_cast<Eigen::Index>(linked.num_entities());
  BinaryMatrix p = BinaryMatrix::Zero(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto& m = linked.entities[static_cast<std::size_t>(j)];
    for (std::size_t t = m.begin; t < m.end; ++t) p(static_cast<Eigen::Index>(t), j) = 1.0;
  }
  return p;
}

std::vector<Triple> extract_subgraph(const KnowledgeBase& kb,
                                     const std::set<std::string>& entity_set) {
  std::vector<Triple> out;
  for (const auto& t : kb.triples()) {
    if (entity_set.count(t.head) && entity_set.count(t.tail)) out.push_back(t);
  }
  return out;
}

std::set<std::string> corpus_entity_set(std::span<const LinkedText> corpus) {
  std::set<std::string> ids;
  for (const auto& text : corpus) {
    for (const auto& m : text.entities) ids.insert(m.entity_id);
  }
  return ids;
}

KnowledgeBase restrict_kb(const KnowledgeBase& kb, const std::set<std::string>& entity_set) {
  std::vector<Entity> entities;
  for (const auto& e : kb.entities()) {
    if (entity_set.count(e.id)) entities.push_back(e);
  }
  return KnowledgeBase(std::move(entities), kb.relations(), extract_subgraph(kb, entity_set));
}

}  // namespace kvlp::kb
