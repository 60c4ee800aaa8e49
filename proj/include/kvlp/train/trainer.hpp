#pragma once

#include "kvlp/data/dataset.hpp"
#include "kvlp/kge/kge_io.hpp"
#include "kvlp/model/model.hpp"
#include "kvlp/objectives/pretext.hpp"
#include "kvlp/train/optim.hpp"
#include "kvlp/train/settings.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kvlp::train {

// A non-finite value during a training step; names the sample and the loss
// component (or "forward" / "gradient") where it appeared.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::string sample_id, std::string component, int step, const std::string& detail);
  std::string sample_id;
  std::string component;
  int step;
};

// Corpus, restricted KB and KGE artifacts resolved from the settings.
struct PretrainData {
  kb::KnowledgeBase kb;
  kge::KGEArtifact kge;
  obj::EntityTable entities;
  kb::Vocabulary vocab;
  std::vector<data::Sample> samples;
  std::vector<const data::Sample*> train;
};

// Missing inputs throw ConfigError. The vocabulary is built from the train
// split unless one is given (resuming, evaluating a checkpoint).
PretrainData load_pretrain_data(const Settings& s, const kb::Vocabulary* vocab = nullptr);

// Sets model.encoder.vocab_size from the vocabulary when it is 0.
model::ModelConfig resolve_model_config(const Settings& s, const kb::Vocabulary& vocab);

// Indices into the training split for one step; a pure function of
// (seed, step). Each epoch walks a fresh permutation.
std::vector<int> batch_indices(std::uint64_t seed, int step, int batch_size, int n);

struct StepStats {
  int step = 0;
  double lr_encoder = 0, lr_other = 0;
  double mlm = 0, mim = 0, itm = 0;
  std::optional<double> l_vk, l_lk;  // only with AK
  double total = 0;
  double grad_norm = 0;

  bool operator==(const StepStats&) const = default;
};

// One optimizer step on a batch: per-sample masking plans and ITM negatives
// (another in-batch text with probability itm_negative_prob), the mean of the
// per-sample total losses, backward, clipping, and the scheduled update.
StepStats train_step(model::Model& m, AdamW& opt, const obj::EntityTable& entities,
                     std::span<const data::Sample* const> batch, const Settings& s, int step,
                     const Schedule& schedule);

AdamWConfig adamw_config(const OptimSettings& o);

std::string metrics_header();
std::string metrics_row(const StepStats& st);

struct PretrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<StepStats> trace;  // steps run by this call
};

// Trains for s.optim.steps from initialization, or from `resume` (a
// checkpoint directory) up to the same total. Writes <out>/metrics.csv,
// <out>/ckpt-NNNNNN every checkpoint_every steps and a final checkpoint.
// A TrainingError leaves <out>/nonfinite.json behind.
PretrainResult pretrain(const Settings& s, const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& resume = std::nullopt);

// A checkpoint restored for evaluation or fine-tuning; data directories come
// from `s`, the architecture and vocabulary from the checkpoint.
struct TrainedModel {
  Settings settings;
  PretrainData data;
  std::unique_ptr<model::Model> model;
  int step = 0;
};

TrainedModel load_trained(const Settings& s, const std::filesystem::path& checkpoint);

std::filesystem::path checkpoint_path(const std::filesystem::path& out, int step);

}  // namespace kvlp::train
