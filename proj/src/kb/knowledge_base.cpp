#include "kvlp/kb/knowledge_base.hpp"

#include "kvlp/kb/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace kvlp::kb {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path,
                                               std::size_t min_fields) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() < min_fields) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(min_fields) + " tab-separated fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  });
  return s;
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<Entity> entities, std::vector<Relation> relations,
                             std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)), triples_(std::move(triples)) {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    auto& e = entities_[i];
    if (e.id.empty()) throw FormatError("entity with empty id");
    if (!entity_index_.emplace(e.id, i).second) throw FormatError("duplicate entity id " + e.id);
    if (e.synonyms.empty()) e.synonyms.push_back(lower(e.canonical_name));
  }
  std::unordered_set<std::string> rel_ids;
  for (const auto& r : relations_) {
    if (!rel_ids.insert(r.id).second) throw FormatError("duplicate relation id " + r.id);
  }
  for (const auto& t : triples_) {
    if (!has_entity(t.head) || !has_entity(t.tail)) {
      throw IntegrityError("triple (" + t.head + ", " + t.relation + ", " + t.tail +
                           ") references an unknown entity");
    }
    if (!rel_ids.count(t.relation)) {
      throw IntegrityError("triple references unknown relation " + t.relation);
    }
  }
  for (const auto& e : entities_) {
    for (const auto& syn : e.synonyms) {
      auto toks = tokenize(syn);
      if (toks.empty()) continue;
      max_surface_tokens_ = std::max(max_surface_tokens_, toks.size());
      lexicon_.emplace(join(toks), e.id);  // first writer wins
    }
  }
}

const Entity& KnowledgeBase::entity(const std::string& id) const {
  auto it = entity_index_.find(id);
  if (it == entity_index_.end()) throw IntegrityError("unknown entity " + id);
  return entities_[it->second];
}

KnowledgeBase load_kb(const std::filesystem::path& dir) {
  std::vector<Entity> entities;
  for (auto& f : read_tsv(dir / "entities.tsv", 2)) {
    Entity e{f[0], f[1], {}};
    if (f.size() > 2) {
      for (auto& s : split(f[2], '|')) {
        if (!s.empty()) e.synonyms.push_back(lower(s));
      }
    }
    const auto canon = lower(e.canonical_name);
    if (std::find(e.synonyms.begin(), e.synonyms.end(), canon) == e.synonyms.end()) {
      e.synonyms.insert(e.synonyms.begin(), canon);
    }
    entities.push_back(std::move(e));
  }
  std::vector<Relation> relations;
  for (auto& f : read_tsv(dir / "relations.tsv", 2)) relations.push_back({f[0], f[1]});
  std::vector<Triple> triples;
  for (auto& f : read_tsv(dir / "triples.tsv", 3)) triples.push_back({f[0], f[1], f[2]});
  return KnowledgeBase(std::move(entities), std::move(relations), std::move(triples));
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("entities.tsv");
    for (const auto& e : kb.entities()) {
      out << e.id << '\t' << e.canonical_name << '\t' << join(e.synonyms, "|") << '\n';
    }
  }
  {
    auto out = open("relations.tsv");
    for (const auto& r : kb.relations()) out << r.id << '\t' << r.name << '\n';
  }
  {
    auto out = open("triples.tsv");
    for (const auto& t : kb.triples()) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  }
}

}  // namespace kvlp::kb
