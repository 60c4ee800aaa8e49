#include "kvlp/synth/generator.hpp"

#include "kvlp/kb/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace kvlp::synth {

namespace {

const std::vector<std::string> kTemplate = {"the", "image", "shows"};

std::string entity_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "E%04d", i);
  return buf;
}

std::string pair_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%05d", i);
  return buf;
}

class WordSource {
 public:
  explicit WordSource(std::uint64_t seed) : rng_(substream(seed, "words")) {
    for (const auto& w : filler_words()) used_.insert(w);
    for (const auto& w : kTemplate) used_.insert(w);
    used_.insert("and");
  }

  std::string next() {
    static const char* consonants = "bdfgklmnprstvz";
    static const char* vowels = "aeiou";
    for (;;) {
      const int syllables = 2 + static_cast<int>(uniform_index(rng_, 2));
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += consonants[uniform_index(rng_, 14)];
        w += vowels[uniform_index(rng_, 5)];
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::string surface() {
    const bool two = uniform_real(rng_) < 0.3;
    return two ? next() + " " + next() : next();
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::unordered_set<std::string> used_;
};

}  // namespace

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "near",    "left",     "right",   "upper",   "lower",  "small",   "large",   "faint",
      "bright",  "dark",     "region",  "area",    "view",   "scan",    "slice",   "edge",
      "center",  "border",   "visible", "noted",   "seen",   "mild",    "clear",   "dense",
      "round",   "oval",     "thin",    "thick",   "wide",   "narrow",  "patchy",  "diffuse",
      "focal",   "linear",   "stable",  "prior",   "early",  "late",    "partial", "minor",
      "overall", "adjacent", "distal",  "central", "lateral", "medial", "anterior", "posterior",
      "smooth",  "uniform"};
  return words;
}

void validate(const GeneratorConfig& cfg) {
  if (cfg.triple_density < 0.0 || cfg.triple_density > 1.0) {
    throw std::invalid_argument("triple_density must lie in [0, 1]");
  }
  if (cfg.entities_per_pair < 1) throw std::invalid_argument("entities_per_pair must be >= 1");
  if (cfg.n_entities < cfg.entities_per_pair) {
    throw std::invalid_argument("n_entities smaller than entities_per_pair");
  }
  if (cfg.glyph_cell <= 0 || cfg.image_size % cfg.glyph_cell != 0) {
    throw std::invalid_argument("image_size must be a multiple of glyph_cell");
  }
  if (cfg.glyph_cell % 2 != 0) throw std::invalid_argument("glyph_cell must be even");
  if (cfg.n_filler < 1 || cfg.n_filler > static_cast<int>(filler_words().size())) {
    throw std::invalid_argument("n_filler must lie in [1, 50]");
  }
  if (cfg.filler_min < 0 || cfg.filler_max < cfg.filler_min) {
    throw std::invalid_argument("invalid filler length range");
  }
  if (cfg.n_pairs < 0 || cfg.n_relations < 0 || cfg.n_distractors < 0) {
    throw std::invalid_argument("negative count in generator config");
  }
}

kb::KnowledgeBase generate_kb(const GeneratorConfig& cfg) {
  validate(cfg);
  WordSource words(cfg.seed);
  std::vector<kb::Entity> entities;
  const int total = cfg.n_entities + cfg.n_distractors;
  for (int i = 0; i < total; ++i) {
    kb::Entity e;
    e.id = entity_id(i);
    e.canonical_name = words.surface();
    e.synonyms.push_back(e.canonical_name);
    const int extra = static_cast<int>(uniform_index(words.rng(), 3));
    for (int s = 0; s < extra; ++s) e.synonyms.push_back(words.surface());
    entities.push_back(std::move(e));
  }
  static const char* rel_names[] = {"associated_with", "part_of", "located_in", "causes",
                                    "treated_by", "co_occurs_with"};
  std::vector<kb::Relation> relations;
  for (int r = 0; r < cfg.n_relations; ++r) {
    relations.push_back({"R" + std::to_string(r), std::string(rel_names[r % 6]) +
                                                      (r >= 6 ? "_" + std::to_string(r / 6) : "")});
  }
  std::vector<kb::Triple> triples;
  Rng rng = substream(cfg.seed, "triples");
  for (int h = 0; h < total; ++h) {
    for (int t = 0; t < total; ++t) {
      if (h == t) continue;
      for (int r = 0; r < cfg.n_relations; ++r) {
        if (uniform_real(rng) < cfg.triple_density) {
          triples.push_back({entity_id(h), relations[static_cast<std::size_t>(r)].id, entity_id(t)});
        }
      }
    }
  }
  return kb::KnowledgeBase(std::move(entities), std::move(relations), std::move(triples));
}

std::vector<std::string> corpus_entity_ids(const kb::KnowledgeBase& kb, const GeneratorConfig& cfg) {
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.n_entities && i < static_cast<int>(kb.num_entities()); ++i) {
    ids.push_back(kb.entities()[static_cast<std::size_t>(i)].id);
  }
  return ids;
}

data::Image entity_glyph(const std::string& id, const GeneratorConfig& cfg) {
  Rng rng = substream(cfg.seed, "glyph", fnv1a(id));
  const int cells_per_side = cfg.image_size / cfg.glyph_cell;
  const int cell = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cells_per_side * cells_per_side)));
  const int oy = (cell / cells_per_side) * cfg.glyph_cell;
  const int ox = (cell % cells_per_side) * cfg.glyph_cell;
  const double intensity = 0.5 + 0.5 * uniform_real(rng);
  data::Image img = data::blank_image(cfg.image_size, cfg.image_size, 1);
  const int blocks = cfg.glyph_cell / 2;
  bool any = false;
  for (int by = 0; by < blocks; ++by) {
    for (int bx = 0; bx < blocks; ++bx) {
      const bool on = uniform_real(rng) < 0.5 || (!any && by == blocks - 1 && bx == blocks - 1);
      if (!on) continue;
      any = true;
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) img.at(oy + 2 * by + y, ox + 2 * bx + x) = intensity;
      }
    }
  }
  return img;
}

SyntheticPair generate_pair(const kb::KnowledgeBase& kb, const std::vector<std::string>& subset,
                            const GeneratorConfig& cfg, Rng& rng) {
  if (subset.empty()) throw std::invalid_argument("generate_pair: empty entity subset");
  SyntheticPair pair;
  pair.image = data::blank_image(cfg.image_size, cfg.image_size, 1);
  std::vector<std::string> tokens = kTemplate;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const kb::Entity& e = kb.entity(subset[k]);  // throws on unknown ids
    if (k > 0) tokens.push_back("and");
    const auto& syn = e.synonyms[uniform_index(rng, e.synonyms.size())];
    for (auto& w : kb::tokenize(syn)) tokens.push_back(w);
    const data::Image glyph = entity_glyph(e.id, cfg);
    for (std::size_t p = 0; p < glyph.pixels.size(); ++p) pair.image.pixels[p] += glyph.pixels[p];
    pair.gold_entities.push_back(e.id);
  }
  data::quantize_8bit(pair.image);
  const int n_fill = cfg.filler_min +
                     static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.filler_max - cfg.filler_min + 1)));
  for (int f = 0; f < n_fill; ++f) {
    tokens.push_back(filler_words()[uniform_index(rng, static_cast<std::uint64_t>(cfg.n_filler))]);
  }
  pair.text = kb::join(tokens);
  return pair;
}

SyntheticCorpus generate_corpus(const GeneratorConfig& cfg) {
  SyntheticCorpus out{generate_kb(cfg), {}};
  const auto eligible = corpus_entity_ids(out.kb, cfg);
  Rng subset_rng = substream(cfg.seed, "subsets");
  std::set<std::vector<int>> seen;
  const int n_train = static_cast<int>(std::lround(0.8 * cfg.n_pairs));
  const int n_val = static_cast<int>(std::lround(0.1 * cfg.n_pairs));
  for (int p = 0; p < cfg.n_pairs; ++p) {
    std::vector<int> pick;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) {
        throw std::invalid_argument("cannot draw enough distinct entity subsets for n_pairs");
      }
      pick = sample_without_replacement(subset_rng, static_cast<int>(eligible.size()),
                                        cfg.entities_per_pair);
      std::vector<int> key = pick;
      std::sort(key.begin(), key.end());
      if (seen.insert(key).second) break;
    }
    std::vector<std::string> subset;
    for (int i : pick) subset.push_back(eligible[static_cast<std::size_t>(i)]);
    Rng rng = substream(cfg.seed, "pair", static_cast<std::uint64_t>(p));
    SyntheticPair pair = generate_pair(out.kb, subset, cfg, rng);
    pair.id = pair_id(p);
    pair.split = p < n_train ? kb::Split::kTrain
                             : (p < n_train + n_val ? kb::Split::kVal : kb::Split::kTest);
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

void write_corpus_dir(const SyntheticCorpus& corpus, const GeneratorConfig& cfg,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  kb::save_kb(corpus.kb, dir / "kb");
  std::vector<kb::CorpusRecord> records;
  nlohmann::ordered_json gold = nlohmann::ordered_json::object();
  for (const auto& p : corpus.pairs) {
    const std::string rel = "images/" + p.id + ".pgm";
    data::write_pgm(p.image, dir / rel);
    records.push_back({p.id, rel, p.text, p.split});
    gold[p.id] = p.gold_entities;
  }
  kb::write_corpus(records, dir / "corpus.jsonl");
  nlohmann::ordered_json m;
  m["generator"] = {{"n_entities", cfg.n_entities},       {"n_distractors", cfg.n_distractors},
                    {"n_relations", cfg.n_relations},     {"triple_density", cfg.triple_density},
                    {"n_pairs", cfg.n_pairs},             {"entities_per_pair", cfg.entities_per_pair},
                    {"image_size", cfg.image_size},       {"glyph_cell", cfg.glyph_cell},
                    {"n_filler", cfg.n_filler},           {"filler_min", cfg.filler_min},
                    {"filler_max", cfg.filler_max},       {"seed", cfg.seed}};
  int counts[3] = {0, 0, 0};
  for (const auto& p : corpus.pairs) ++counts[static_cast<int>(p.split)];
  m["splits"] = {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}};
  m["num_entities"] = corpus.kb.num_entities();
  m["num_triples"] = corpus.kb.num_triples();
  m["gold_entities"] = gold;
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

}  // namespace kvlp::synth
