#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kvlp::kb {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entity {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> synonyms;  // lowercase, includes the canonical name

  bool operator==(const Entity&) const = default;
};

struct Relation {
  std::string id;
  std::string name;

  bool operator==(const Relation&) const = default;
};

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triple&) const = default;
  auto operator<=>(const Triple&) const = default;
};

// Entity table, relation table, triples and the surface-form lexicon.
// Immutable after construction.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  // Validates ids and triple endpoints, then builds the lexicon.
  KnowledgeBase(std::vector<Entity> entities, std::vector<Relation> relations,
                std::vector<Triple> triples);

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Triple>& triples() const { return triples_; }

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_triples() const { return triples_.size(); }

  bool has_entity(const std::string& id) const { return entity_index_.count(id) != 0; }
  const Entity& entity(const std::string& id) const;

  // Tokenized surface form (space-joined) to entity id. On collisions the
  // entity appearing first in file order keeps the entry.
  const std::unordered_map<std::string, std::string>& lexicon() const { return lexicon_; }
  std::size_t max_surface_tokens() const { return max_surface_tokens_; }

  bool operator==(const KnowledgeBase& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_ &&
           triples_ == other.triples_;
  }

 private:
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::unordered_map<std::string, std::string> lexicon_;
  std::size_t max_surface_tokens_ = 0;
};

// Reads entities.tsv, relations.tsv and triples.tsv from `dir`.
KnowledgeBase load_kb(const std::filesystem::path& dir);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& dir);

}  // namespace kvlp::kb
