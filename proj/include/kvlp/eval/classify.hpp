#pragma once

#include "kvlp/eval/retrieval.hpp"
#include "kvlp/model/layers.hpp"

#include <memory>

namespace kvlp::eval {

// Two-layer perceptron over [Z^v row 0 ; Z^l row 0]; the output layer starts
// at zero so initial predictions are uniform.
class ClassifierHead {
 public:
  ClassifierHead(int in, int hidden, int classes, std::uint64_t seed);
  ad::Tensor operator()(const ad::Tensor& features) const;
  model::ParamStore& params() { return params_; }
  int classes() const { return static_cast<int>(fc2_.out_features()); }

 private:
  model::ParamStore params_;
  model::Linear fc1_, fc2_;
};

// Each item's label list; single-label tasks have exactly one entry.
using Labels = std::vector<std::vector<int>>;

struct ClassifierResult {
  std::unique_ptr<ClassifierHead> head;
  std::vector<double> epoch_loss;
  double initial_loss = 0;  // mean training loss before the first update
  double accuracy = 0;      // on the evaluation items; argmax in the label set
};

ad::Tensor pooled_features(const model::Model& m, const obj::EntityTable& entities, const data::Sample& s);

// Cross-entropy when single-label, mean binary cross-entropy over classes
// when multi_label. With freeze_backbone only the head trains. Labels outside
// [0, n_classes) or count mismatches throw std::invalid_argument.
ClassifierResult finetune_classifier(model::Model& m, const obj::EntityTable& entities, Pool train,
                                     const Labels& train_labels, Pool evaluate, const Labels& eval_labels,
                                     int n_classes, bool multi_label, const train::FinetuneSettings& cfg,
                                     std::uint64_t seed);

// Synthetic stand-in task: 1 when the designated entity's glyph is in the
// image (its entity appears in the pair), else 0.
Labels presence_labels(Pool items, int entity_row);

}  // namespace kvlp::eval
