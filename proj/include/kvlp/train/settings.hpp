#pragma once

#include "kvlp/kge/transe.hpp"
#include "kvlp/model/model.hpp"
#include "kvlp/objectives/pretext.hpp"
#include "kvlp/synth/generator.hpp"
#include "kvlp/util/config.hpp"

#include <cstdint>
#include <string>

namespace kvlp::train {

struct OptimSettings {
  int steps = 1000;
  int batch_size = 16;
  double lr_encoder = 1e-3;  // vision.* and text.* parameters
  double lr_other = 3e-3;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  double clip_norm = 1.0;    // <= 0 disables clipping
  bool round_to_f32 = true;  // keep parameters and moments f32-representable
};

struct FinetuneSettings {
  int retrieval_epochs = 3;
  int retrieval_negatives = 15;
  double retrieval_lr = 3e-4;
  int classify_epochs = 10;
  double classify_lr = 1e-3;
  bool classify_freeze_backbone = true;
  int classify_hidden = 64;
};

// Everything a command can be configured with; mirrors the flat config file.
struct Settings {
  std::uint64_t seed = 1;
  std::string corpus_dir = "corpus";
  std::string kb_dir = "kb";   // restricted KB written by extract-kb
  std::string kge_dir = "kge";
  model::ModelConfig model;    // encoder.vocab_size is filled from the data
  obj::PretextOptions pretext;
  bool alignment_uses_transe = false;
  double itm_negative_prob = 0.5;
  int checkpoint_every = 0;  // 0: final checkpoint only
  OptimSettings optim;
  FinetuneSettings finetune;
  kge::TransEConfig transe;
  synth::GeneratorConfig generator;
};

Settings settings_from_config(const Config& c);
Config settings_to_config(const Settings& s);

// Stable hash of the architecture (model config including vocab size).
std::uint64_t architecture_hash(const model::ModelConfig& m);

}  // namespace kvlp::train
