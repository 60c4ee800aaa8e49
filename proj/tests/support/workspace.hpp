#pragma once

#include "temp_dir.hpp"

#include "kvlp/train/pipeline.hpp"
#include "kvlp/train/settings.hpp"

namespace kvlp::testing {

// Small corpus, restricted KB and KGE under one temporary directory, with a
// model small enough for a few hundred steps inside a unit test.
inline train::Settings tiny_settings(const std::filesystem::path& root) {
  train::Settings s;
  s.seed = 7;
  s.corpus_dir = (root / "corpus").string();
  s.kb_dir = (root / "kb").string();
  s.kge_dir = (root / "kge").string();
  auto& g = s.generator;
  g.n_pairs = 60;
  g.n_entities = 12;
  g.n_distractors = 2;
  g.triple_density = 0.1;
  g.image_size = 16;
  g.glyph_cell = 8;
  g.filler_min = 2;
  g.filler_max = 4;
  g.seed = s.seed;
  auto& e = s.model.encoder;
  e.image_height = e.image_width = 16;
  e.patch = 8;
  e.width = 16;
  e.heads = 2;
  e.vision_layers = 1;
  e.text_layers = 1;
  e.max_text_len = 16;
  e.ffn_mult = 2;
  s.model.fusion.layers = 1;
  s.model.fusion.width = 16;
  s.model.fusion.heads = 2;
  s.model.fusion.ffn_mult = 2;
  s.transe.dim = 8;
  s.transe.epochs = 30;
  s.transe.seed = s.seed;
  s.model.entity_dim = 8;
  s.optim.steps = 6;
  s.optim.batch_size = 4;
  return s;
}

inline train::Settings prepare_workspace(const std::filesystem::path& root) {
  auto s = tiny_settings(root);
  train::generate_corpus(s, s.corpus_dir);
  train::extract_kb(s, s.kb_dir);
  train::train_kge(s, s.kge_dir);
  return s;
}

}  // namespace kvlp::testing
