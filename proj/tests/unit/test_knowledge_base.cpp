#include "doctest.h"
#include "temp_dir.hpp"

#include "kvlp/kb/corpus.hpp"
#include "kvlp/kb/knowledge_base.hpp"
#include "kvlp/kb/linker.hpp"
#include "kvlp/kb/text.hpp"
#include "kvlp/synth/generator.hpp"

#include <fstream>

using namespace kvlp;
using namespace kvlp::kb;
using kvlp::testing::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p) << content;
}

void write_fixture(const std::filesystem::path& dir, const std::string& triples) {
  write_file(dir / "entities.tsv",
             "C1\tBrain MRI\tbrain magnetic resonance imaging|brain mri\n"
             "C2\tLesion\tlesion\n"
             "C3\tBrain\tbrain\n");
  write_file(dir / "relations.tsv", "R1\tlocated_in\nR2\tpart_of\n");
  write_file(dir / "triples.tsv", triples);
}

// Independent matcher: at each position scan every lexicon entry and keep the
// longest one matching there; ties go to the earliest file-order entity.
std::vector<EntityMention> brute_force_link(const std::vector<std::string>& tokens,
                                            const KnowledgeBase& kb) {
  struct Entry {
    std::vector<std::string> toks;
    std::string id;
  };
  std::vector<Entry> entries;
  for (const auto& e : kb.entities()) {
    for (const auto& s : e.synonyms) entries.push_back({tokenize(s), e.id});
  }
  std::vector<EntityMention> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const Entry* best = nullptr;
    for (const auto& en : entries) {
      if (en.toks.empty() || i + en.toks.size() > tokens.size()) continue;
      if (!std::equal(en.toks.begin(), en.toks.end(), tokens.begin() + static_cast<long>(i))) continue;
      if (!best || en.toks.size() > best->toks.size()) best = &en;
    }
    if (best) {
      out.push_back({best->id, i, i + best->toks.size()});
      i += best->toks.size();
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("Brain MRI, shows: a lesion.") ==
        std::vector<std::string>{"brain", "mri", "shows", "a", "lesion"});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("vocabulary reserves specials and round-trips") {
  auto v = Vocabulary::build({{"b", "a"}, {"a", "c"}});
  CHECK(v.size() == 7);
  CHECK(v.token(Vocabulary::kMask) == "[MASK]");
  CHECK(v.id("a") == 4);
  CHECK(v.id("zzz") == Vocabulary::kUnk);
  TempDir tmp;
  v.save(tmp / "vocab.txt");
  CHECK(Vocabulary::load(tmp / "vocab.txt") == v);
}

TEST_CASE("load_kb on a small fixture") {
  TempDir tmp;
  write_fixture(tmp.path(), "C1\tR1\tC3\nC2\tR1\tC3\n");
  auto kb = load_kb(tmp.path());
  CHECK(kb.num_entities() == 3);
  CHECK(kb.num_triples() == 2);
  CHECK(kb.entity("C1").synonyms == std::vector<std::string>{"brain magnetic resonance imaging", "brain mri"});
  CHECK(kb.entity("C2").synonyms == std::vector<std::string>{"lesion"});
  CHECK(kb.lexicon().at("brain magnetic resonance imaging") == "C1");
  CHECK(kb.max_surface_tokens() == 4);
}

TEST_CASE("load_kb rejects dangling endpoints and duplicate ids") {
  TempDir tmp;
  write_fixture(tmp.path(), "C1\tR1\tC9\n");
  CHECK_THROWS_AS(load_kb(tmp.path()), IntegrityError);
  write_fixture(tmp.path(), "");
  write_file(tmp / "entities.tsv", "C1\tA\ta\nC1\tB\tb\n");
  CHECK_THROWS_AS(load_kb(tmp.path()), FormatError);
}

TEST_CASE("synthetic KB round-trips through the TSV files") {
  synth::GeneratorConfig cfg;
  cfg.n_pairs = 0;
  auto kb = synth::generate_kb(cfg);
  TempDir tmp;
  save_kb(kb, tmp.path());
  CHECK(load_kb(tmp.path()) == kb);
}

TEST_CASE("link_entities basic cases") {
  TempDir tmp;
  write_fixture(tmp.path(), "");
  auto kb = load_kb(tmp.path());

  auto empty = link_entities({}, kb);
  CHECK(empty.entities.empty());
  auto p0 = build_matching_matrix(empty);
  CHECK(p0.rows() == 0);
  CHECK(p0.cols() == 0);

  auto linked = link_entities({"brain", "magnetic", "resonance", "imaging", "shows", "lesion"}, kb);
  REQUIRE(linked.entities.size() == 2);
  CHECK(linked.entities[0] == EntityMention{"C1", 0, 4});
  CHECK(linked.entities[1] == EntityMention{"C2", 5, 6});

  auto shorter = link_entities({"brain", "magnetic", "lesion"}, kb);
  REQUIRE(shorter.entities.size() == 2);
  CHECK(shorter.entities[0] == EntityMention{"C3", 0, 1});
}

TEST_CASE("ambiguous surface forms resolve to the first entity in file order") {
  KnowledgeBase kb({{"A", "cold", {"cold"}}, {"B", "Cold", {"cold", "chill"}}}, {}, {});
  auto l = link_entities({"cold", "chill"}, kb);
  REQUIRE(l.entities.size() == 2);
  CHECK(l.entities[0].entity_id == "A");
  CHECK(l.entities[1].entity_id == "B");
}

TEST_CASE("linker agrees with the brute-force matcher on 1k synthetic texts") {
  synth::GeneratorConfig cfg;
  cfg.n_pairs = 1000;
  cfg.n_entities = 60;
  cfg.entities_per_pair = 3;
  auto corpus = synth::generate_corpus(cfg);
  int agree = 0;
  for (const auto& p : corpus.pairs) {
    auto toks = tokenize(p.text);
    auto linked = link_entities(toks, corpus.kb);
    agree += linked.entities == brute_force_link(toks, corpus.kb);
    // determinism and idempotence
    CHECK(link_entities(linked.tokens, corpus.kb).entities == linked.entities);
  }
  CHECK(agree == 1000);
}

TEST_CASE("matching matrix definition and invariants") {
  LinkedText t;
  t.tokens = {"a", "b", "c", "d"};
  t.entities = {{"X", 1, 3}};
  auto p = build_matching_matrix(t);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 1);
  CHECK(p(0, 0) == 0);
  CHECK(p(1, 0) == 1);
  CHECK(p(2, 0) == 1);
  CHECK(p(3, 0) == 0);

  LinkedText none;
  none.tokens = {"a", "b"};
  auto pn = build_matching_matrix(none);
  CHECK(pn.rows() == 2);
  CHECK(pn.cols() == 0);

  // random non-overlapping spans vs the elementwise membership test
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    LinkedText r;
    const std::size_t n = 1 + uniform_index(rng, 30);
    r.tokens.assign(n, "w");
    std::size_t i = 0;
    while (i < n) {
      if (uniform_real(rng) < 0.3) {
        const std::size_t len = 1 + uniform_index(rng, std::min<std::size_t>(3, n - i));
        r.entities.push_back({"E", i, i + len});
        i += len;
      } else {
        ++i;
      }
    }
    auto m = build_matching_matrix(r);
    double covered = 0;
    for (std::size_t row = 0; row < n; ++row) {
      double row_sum = 0;
      for (std::size_t col = 0; col < r.entities.size(); ++col) {
        const auto& e = r.entities[col];
        const double expect = (row >= e.begin && row < e.end) ? 1.0 : 0.0;
        CHECK(m(static_cast<long>(row), static_cast<long>(col)) == expect);
        row_sum += expect;
      }
      CHECK((row_sum == 0.0 || row_sum == 1.0));
    }
    for (const auto& e : r.entities) covered += static_cast<double>(e.length());
    CHECK(m.sum() == covered);
    for (long c = 0; c < m.cols(); ++c) CHECK(m.col(c).sum() >= 1.0);
  }
}

TEST_CASE("extract_subgraph matches a brute-force filter") {
  synth::GeneratorConfig cfg;
  cfg.n_entities = 12;
  cfg.n_distractors = 0;
  cfg.n_relations = 2;
  cfg.triple_density = 0.2;
  auto kb = synth::generate_kb(cfg);
  REQUIRE(kb.num_triples() >= 40);

  std::set<std::string> all, none;
  for (const auto& e : kb.entities()) all.insert(e.id);
  CHECK(extract_subgraph(kb, all) == kb.triples());
  CHECK(extract_subgraph(kb, none).empty());

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::set<std::string> s1, s2;
    for (const auto& e : kb.entities()) {
      if (uniform_real(rng) < 0.5) s1.insert(e.id);
      if (uniform_real(rng) < 0.5) s2.insert(e.id);
    }
    std::vector<Triple> expect;
    for (const auto& t : kb.triples()) {
      bool h = false, tl = false;
      for (const auto& id : s1) {
        h = h || id == t.head;
        tl = tl || id == t.tail;
      }
      if (h && tl) expect.push_back(t);
    }
    auto got = extract_subgraph(kb, s1);
    CHECK(got == expect);
    std::set<std::string> uni = s1;
    uni.insert(s2.begin(), s2.end());
    auto bigger = extract_subgraph(kb, uni);
    std::set<Triple> bigger_set(bigger.begin(), bigger.end());
    for (const auto& t : got) CHECK(bigger_set.count(t) == 1);
  }
}

TEST_CASE("corpus_entity_set unions entity sequences") {
  LinkedText a, b;
  a.entities = {{"E1", 0, 1}, {"E2", 2, 3}};
  b.entities = {{"E3", 0, 1}};
  std::vector<LinkedText> one = {a};
  CHECK(corpus_entity_set(one) == std::set<std::string>{"E1", "E2"});
  std::vector<LinkedText> both = {a, b};
  CHECK(corpus_entity_set(both).size() == 3);

  synth::GeneratorConfig cfg;
  cfg.n_pairs = 200;
  auto corpus = synth::generate_corpus(cfg);
  std::vector<LinkedText> linked;
  std::set<std::string> brute;
  for (const auto& p : corpus.pairs) {
    linked.push_back(link_entities(tokenize(p.text), corpus.kb));
    for (const auto& m : linked.back().entities) brute.insert(m.entity_id);
  }
  CHECK(corpus_entity_set(linked) == brute);
}

TEST_CASE("corpus jsonl round trip") {
  TempDir tmp;
  std::vector<CorpusRecord> recs = {{"a", "images/a.pgm", "some \"quoted\" text", Split::kTrain},
                                    {"b", "images/b.pgm", "x", Split::kTest}};
  write_corpus(recs, tmp / "corpus.jsonl");
  CHECK(read_corpus(tmp / "corpus.jsonl") == recs);
}
