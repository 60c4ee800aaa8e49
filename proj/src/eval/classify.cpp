#include "kvlp/eval/classify.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/train/optim.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvlp::eval {

namespace {

model::Linear make_fc(model::ParamStore& ps, const std::string& name, int in, int out, std::uint64_t seed) {
  Rng rng = substream(seed, "classifier-init", fnv1a(name));
  return model::Linear(ps, name, in, out, rng);
}

void check_labels(Pool items, const Labels& labels, int n_classes, bool multi_label) {
  if (n_classes < 1) throw std::invalid_argument("finetune_classifier: need at least one class");
  if (items.size() != labels.size()) throw std::invalid_argument("finetune_classifier: label count differs from items");
  for (const auto& l : labels) {
    if (!multi_label && l.size() != 1) throw std::invalid_argument("finetune_classifier: single-label item without exactly one label");
    for (int c : l) {
      if (c < 0 || c >= n_classes) throw std::invalid_argument("finetune_classifier: label " + std::to_string(c) + " out of range");
    }
  }
}

ad::Tensor item_loss(const ad::Tensor& logits, const std::vector<int>& labels, int n_classes, bool multi_label) {
  if (!multi_label) return ad::cross_entropy(logits, labels);
  Matrix y = Matrix::Zero(1, n_classes);
  for (int c : labels) y(0, c) = 1;
  return ad::scale(ad::binary_cross_entropy_with_logits(logits, ad::Tensor(y)), 1.0 / n_classes);
}

}  // namespace

ClassifierHead::ClassifierHead(int in, int hidden, int classes, std::uint64_t seed)
    : fc1_(make_fc(params_, "cls.fc1", in, hidden, seed)), fc2_(make_fc(params_, "cls.fc2", hidden, classes, seed)) {
  for (const char* n : {"cls.fc2.w", "cls.fc2.b"}) {
    ad::Tensor t = params_.get(n);
    t.mutable_value().setZero();
  }
}

ad::Tensor ClassifierHead::operator()(const ad::Tensor& features) const { return fc2_(ad::gelu(fc1_(features))); }

ad::Tensor pooled_features(const model::Model& m, const obj::EntityTable& entities, const data::Sample& s) {
  const auto r = m.forward(s.patches, s.token_ids, entities.gather_fusion(s.mention_entities), s.p);
  return ad::concat_cols({ad::slice_rows(r.fused.zv, 0, 1), ad::slice_rows(r.fused.zl, 0, 1)});
}

ClassifierResult finetune_classifier(model::Model& m, const obj::EntityTable& entities, Pool train,
                                     const Labels& train_labels, Pool evaluate, const Labels& eval_labels,
                                     int n_classes, bool multi_label, const train::FinetuneSettings& cfg,
                                     std::uint64_t seed) {
  check_labels(train, train_labels, n_classes, multi_label);
  check_labels(evaluate, eval_labels, n_classes, multi_label);
  if (train.empty()) throw std::invalid_argument("finetune_classifier: no training items");
  const int width = static_cast<int>(m.config().encoder.width);
  ClassifierResult res;
  res.head = std::make_unique<ClassifierHead>(2 * width, cfg.classify_hidden, n_classes, seed);
  ClassifierHead& head = *res.head;
  const bool frozen = cfg.classify_freeze_backbone;

  std::vector<ad::Tensor> cached;
  if (frozen) {
    ad::NoGradGuard g;
    for (const auto* s : train) cached.push_back(ad::Tensor(pooled_features(m, entities, *s).value()));
  }
  auto features = [&](std::size_t i) { return frozen ? cached[i] : pooled_features(m, entities, *train[i]); };

  {
    ad::NoGradGuard g;
    double l = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      l += item_loss(head(features(i)), train_labels[i], n_classes, multi_label).item();
    }
    res.initial_loss = l / static_cast<double>(train.size());
  }

  constexpr std::size_t kBatch = 16;
  const int n = static_cast<int>(train.size());
  const int per_epoch = (n + static_cast<int>(kBatch) - 1) / static_cast<int>(kBatch);
  const train::Schedule schedule{per_epoch * std::max(cfg.classify_epochs, 0), 0.1};
  train::AdamWConfig acfg;
  acfg.round_to_f32 = false;
  train::AdamW head_opt(head.params(), acfg);
  std::unique_ptr<train::AdamW> body_opt;
  if (!frozen) body_opt = std::make_unique<train::AdamW>(m.params(), acfg);
  int update = 0;
  for (int epoch = 0; epoch < cfg.classify_epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng = substream(seed, "finetune-classifier", static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    double total = 0;
    for (std::size_t b = 0; b < order.size(); b += kBatch) {
      const std::size_t end = std::min(order.size(), b + kBatch);
      for (std::size_t k = b; k < end; ++k) {
        const auto i = static_cast<std::size_t>(order[k]);
        const ad::Tensor loss = item_loss(head(features(i)), train_labels[i], n_classes, multi_label);
        total += loss.item();
        ad::backward(loss, 1.0 / static_cast<double>(end - b));
      }
      const double lr = cfg.classify_lr * schedule.factor(update++);
      train::clip_grad_norm(head.params(), 1.0);
      head_opt.step(head.params(), lr, lr);
      head.params().zero_grad();
      if (body_opt) {
        train::clip_grad_norm(m.params(), 1.0);
        body_opt->step(m.params(), lr, lr);
        m.params().zero_grad();
      }
    }
    res.epoch_loss.push_back(total / n);
  }

  ad::NoGradGuard g;
  int correct = 0;
  for (std::size_t i = 0; i < evaluate.size(); ++i) {
    const Matrix logits = head(pooled_features(m, entities, *evaluate[i])).value();
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(0, c) > logits(0, best)) best = c;
    }
    const auto& l = eval_labels[i];
    correct += std::find(l.begin(), l.end(), static_cast<int>(best)) != l.end();
  }
  res.accuracy = evaluate.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(evaluate.size());
  return res;
}

Labels presence_labels(Pool items, int entity_row) {
  Labels out;
  for (const auto* s : items) {
    out.push_back({std::binary_search(s->entity_set.begin(), s->entity_set.end(), entity_row) ? 1 : 0});
  }
  return out;
}

}  // namespace kvlp::eval
