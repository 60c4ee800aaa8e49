#include "kvlp/eval/retrieval.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/train/optim.hpp"

#include <stdexcept>

namespace kvlp::eval {

namespace {

// log p(matched) - log p(unmatched) of the two-class ITM head
ad::Tensor matched_log_odds(const ad::Tensor& itm_logits) {
  return ad::sub(ad::slice_cols(itm_logits, 1, 1), ad::slice_cols(itm_logits, 0, 1));
}

double matched_logit(const model::Model& m, const obj::EntityTable& entities, const ad::Tensor& hv,
                     const ad::Tensor& hl, const data::Sample& text) {
  const auto fused = m.fuse(hv, hl, entities.gather_fusion(text.mention_entities), text.p);
  return matched_log_odds(m.itm_logits(fused)).item();
}

}  // namespace

double score_pair(const model::Model& m, const obj::EntityTable& entities, const data::Sample& image,
                  const data::Sample& text) {
  ad::NoGradGuard guard;
  return matched_logit(m, entities, m.encoders().encode_image(image.patches), m.encoders().encode_text(text.token_ids),
                       text);
}

Matrix score_matrix(const model::Model& m, const obj::EntityTable& entities, Pool images, Pool texts) {
  ad::NoGradGuard guard;
  std::vector<ad::Tensor> hv, hl;
  for (const auto* s : images) hv.push_back(m.encoders().encode_image(s->patches));
  for (const auto* s : texts) hl.push_back(m.encoders().encode_text(s->token_ids));
  Matrix out(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(texts.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matched_logit(m, entities, hv[i], hl[j], *texts[j]);
    }
  }
  return out;
}

std::string to_string(Direction d) { return d == Direction::kT2I ? "T2I" : "I2T"; }
std::string to_string(Mode m) { return m == Mode::kZeroShot ? "zero-shot" : "fine-tuned"; }

int rank_of(std::span<const double> scores, int truth) {
  const double s = scores[static_cast<std::size_t>(truth)];
  int rank = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const int ci = static_cast<int>(c);
    if (scores[c] > s || (scores[c] == s && ci < truth)) ++rank;
  }
  return rank;
}

RetrievalReports rank_retrieval(const Matrix& scores, Mode mode) {
  if (scores.rows() != scores.cols()) throw std::invalid_argument("rank_retrieval: score matrix must be square");
  const int n = static_cast<int>(scores.rows());
  if (n < 10) throw std::invalid_argument("rank_retrieval: pool of " + std::to_string(n) + " is smaller than K = 10");
  RetrievalReports out;
  auto fill = [&](RetrievalReport& r, Direction d) {
    r.direction = d;
    r.mode = mode;
    r.pool = n;
    int h1 = 0, h5 = 0, h10 = 0;
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
      for (int c = 0; c < n; ++c) row[static_cast<std::size_t>(c)] = d == Direction::kT2I ? scores(c, q) : scores(q, c);
      const int rank = rank_of(row, q);
      h1 += rank < 1;
      h5 += rank < 5;
      h10 += rank < 10;
    }
    r.r1 = static_cast<double>(h1) / n;
    r.r5 = static_cast<double>(h5) / n;
    r.r10 = static_cast<double>(h10) / n;
  };
  fill(out.t2i, Direction::kT2I);
  fill(out.i2t, Direction::kI2T);
  return out;
}

ad::Tensor retrieval_loss(const model::Model& m, const obj::EntityTable& entities, const data::Sample& image,
                          Pool candidates) {
  const ad::Tensor hv = m.encoders().encode_image(image.patches);
  std::vector<ad::Tensor> logits;
  for (const auto* text : candidates) {
    const auto fused = m.fuse(hv, m.encoders().encode_text(text->token_ids),
                              entities.gather_fusion(text->mention_entities), text->p);
    logits.push_back(matched_log_odds(m.itm_logits(fused)));
  }
  const int target = 0;
  return ad::cross_entropy(ad::concat_cols(logits), std::span<const int>(&target, 1));
}

FinetuneLog finetune_retrieval(model::Model& m, const obj::EntityTable& entities, Pool train,
                               const train::FinetuneSettings& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(train.size());
  const int k = cfg.retrieval_negatives;
  if (k < 1 || n < k + 1) {
    throw std::invalid_argument("finetune_retrieval: " + std::to_string(n) + " items cannot supply " +
                                std::to_string(k) + " negatives each");
  }
  FinetuneLog log;
  if (cfg.retrieval_epochs <= 0) return log;
  constexpr int kBatch = 16;
  const int per_epoch = (n + kBatch - 1) / kBatch;
  const train::Schedule schedule{per_epoch * cfg.retrieval_epochs, 0.1};
  train::AdamWConfig acfg;
  acfg.round_to_f32 = false;
  train::AdamW opt(m.params(), acfg);
  auto& params = m.params();
  params.zero_grad();
  for (int epoch = 0; epoch < cfg.retrieval_epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng = substream(seed, "finetune-retrieval", static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    double epoch_loss = 0;
    for (int b = 0; b < per_epoch; ++b) {
      const int begin = b * kBatch, end = std::min(n, begin + kBatch);
      for (int idx = begin; idx < end; ++idx) {
        const int item = order[static_cast<std::size_t>(idx)];
        std::vector<int> candidates = {item};
        for (int c : sample_without_replacement(rng, n - 1, k)) candidates.push_back(c >= item ? c + 1 : c);
        std::vector<const data::Sample*> pool;
        for (int c : candidates) pool.push_back(train[static_cast<std::size_t>(c)]);
        const ad::Tensor loss = retrieval_loss(m, entities, *train[static_cast<std::size_t>(item)], pool);
        epoch_loss += loss.item();
        ad::backward(loss, 1.0 / (end - begin));
      }
      train::clip_grad_norm(params, 1.0);
      const double lr = cfg.retrieval_lr * schedule.factor(log.updates);
      opt.step(params, lr, lr);
      params.zero_grad();
      ++log.updates;
    }
    log.epoch_loss.push_back(epoch_loss / n);
  }
  return log;
}

}  // namespace kvlp::eval
