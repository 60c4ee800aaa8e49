#pragma once

#include "kvlp/kb/knowledge_base.hpp"

#include <Eigen/Dense>

#include <set>
#include <span>
#include <string>
#include <vector>

namespace kvlp::kb {

struct EntityMention {
  std::string entity_id;
  std::size_t begin = 0;  // token span [begin, end)
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool operator==(const EntityMention&) const = default;
};

// Token sequence plus its entity sequence, in text order. Spans never overlap.
struct LinkedText {
  std::vector<std::string> tokens;
  std::vector<EntityMention> entities;

  std::size_t num_tokens() const { return tokens.size(); }
  std::size_t num_entities() const { return entities.size(); }
};

using BinaryMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Greedy left-to-right longest match against the lexicon. Matched tokens are
// consumed, so every token belongs to at most one entity.
LinkedText link_entities(std::vector<std::string> tokens, const KnowledgeBase& kb);

// N_l × N_es incidence matrix: entry (i, j) is 1 iff token i lies in mention j.
BinaryMatrix build_matching_matrix(const LinkedText& linked);

// Triples whose head and tail both belong to `entity_set`, in KB order.
std::vector<Triple> extract_subgraph(const KnowledgeBase& kb, const std::set<std::string>& entity_set);

std::set<std::string> corpus_entity_set(std::span<const LinkedText> corpus);

// The relevant sub-KB: entities of `entity_set` (KB order), all relations,
// and the extracted triples.
KnowledgeBase restrict_kb(const KnowledgeBase& kb, const std::set<std::string>& entity_set);

}  // namespace kvlp::kb
