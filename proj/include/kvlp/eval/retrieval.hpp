#pragma once

#include "kvlp/data/dataset.hpp"
#include "kvlp/model/model.hpp"
#include "kvlp/objectives/pretext.hpp"
#include "kvlp/train/settings.hpp"

#include <span>
#include <string>
#include <vector>

namespace kvlp::eval {

using ad::Matrix;
using Pool = std::span<const data::Sample* const>;

// Matched-class ITM logit, taken relative to the unmatched class (the log-odds
// of a match), for the image of `image` paired with the text of `text`. Pure: no state is shared between calls.
double score_pair(const model::Model& m, const obj::EntityTable& entities, const data::Sample& image,
                  const data::Sample& text);

// scores(i, j) = score_pair(images[i], texts[j]); uni-modal encodings are
// computed once per item.
Matrix score_matrix(const model::Model& m, const obj::EntityTable& entities, Pool images, Pool texts);

enum class Direction { kT2I, kI2T };
enum class Mode { kZeroShot, kFineTuned };

std::string to_string(Direction d);
std::string to_string(Mode m);

struct RetrievalReport {
  Direction direction = Direction::kT2I;
  Mode mode = Mode::kZeroShot;
  double r1 = 0, r5 = 0, r10 = 0;
  int pool = 0;
};

struct RetrievalReports {
  RetrievalReport t2i, i2t;
};

// 0-based rank of candidate `truth` among `scores` (higher first, ties by
// lower index first).
int rank_of(std::span<const double> scores, int truth);

// `scores` is N×N with images as rows and texts as columns; the true pairs
// lie on the diagonal. N < 10 throws std::invalid_argument.
RetrievalReports rank_retrieval(const Matrix& scores, Mode mode = Mode::kZeroShot);

// Cross-entropy of the first candidate (the true text) against the rest,
// over matched-class log-odds of `image` paired with each candidate text.
ad::Tensor retrieval_loss(const model::Model& m, const obj::EntityTable& entities, const data::Sample& image,
                          Pool candidates);

struct FinetuneLog {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  int updates = 0;
};

// Cross-entropy over the true text and `negatives` random other texts per
// image, scored by the ITM head. Every parameter is tuned with AdamW under a
// warm-up/linear-decay schedule, 16 images per update.
FinetuneLog finetune_retrieval(model::Model& m, const obj::EntityTable& entities, Pool train,
                               const train::FinetuneSettings& cfg, std::uint64_t seed);

}  // namespace kvlp::eval
