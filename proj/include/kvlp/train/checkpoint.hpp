#pragma once

#include "kvlp/kb/text.hpp"
#include "kvlp/model/model.hpp"
#include "kvlp/train/optim.hpp"
#include "kvlp/train/settings.hpp"

#include <filesystem>
#include <stdexcept>

namespace kvlp::train {

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// <dir>/manifest.json, params.bin, adam_m.bin, adam_v.bin (LE f32, parameters
// concatenated in registration order, row-major) and vocab.txt.
void save_checkpoint(const std::filesystem::path& dir, const model::Model& m, const AdamW& opt,
                     const Settings& settings, const kb::Vocabulary& vocab, int step);

struct CheckpointInfo {
  int step = 0;
  std::int64_t optimizer_steps = 0;
  std::uint64_t architecture = 0;
  Settings settings;  // model.encoder.vocab_size included
  kb::Vocabulary vocab;
};

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

// Copies the stored parameters (and moments, when `opt` is given) into an
// existing model. A different architecture hash or parameter index throws
// CompatibilityError.
CheckpointInfo load_checkpoint(const std::filesystem::path& dir, model::Model& m, AdamW* opt = nullptr);

}  // namespace kvlp::train
