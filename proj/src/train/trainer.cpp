#include "kvlp/train/trainer.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/train/checkpoint.hpp"
#include "kvlp/util/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace kvlp::train {

TrainingError::TrainingError(std::string id, std::string comp, int st, const std::string& detail)
    : std::runtime_error("non-finite value at step " + std::to_string(st) + ", sample " + id + ", " + comp + ": " +
                         detail),
      sample_id(std::move(id)),
      component(std::move(comp)),
      step(st) {}

PretrainData load_pretrain_data(const Settings& s, const kb::Vocabulary* vocab) {
  const std::filesystem::path corpus(s.corpus_dir), kbdir(s.kb_dir), kgedir(s.kge_dir);
  if (!std::filesystem::exists(corpus / "corpus.jsonl")) throw ConfigError("no corpus.jsonl in " + corpus.string());
  if (!std::filesystem::exists(kbdir / "entities.tsv")) throw ConfigError("no knowledge base in " + kbdir.string());
  if (!std::filesystem::exists(kgedir / "kge.json")) throw ConfigError("no KGE artifact in " + kgedir.string());
  PretrainData d;
  d.kb = kb::load_kb(kbdir);
  d.kge = kge::load_kge(kgedir);
  d.entities = obj::make_entity_table(d.kge, d.kb.triples(), s.alignment_uses_transe);
  const auto records = kb::read_corpus(corpus / "corpus.jsonl");
  d.vocab = vocab ? *vocab : data::build_vocabulary(records);
  const auto cfg = resolve_model_config(s, d.vocab);
  d.samples = data::load_samples(corpus, records, d.kb, d.vocab, data::make_entity_row_index(d.entities.ids),
                                 cfg.encoder);
  d.train = data::split_view(d.samples, kb::Split::kTrain);
  if (d.train.empty()) throw ConfigError("corpus has no training pairs");
  return d;
}

model::ModelConfig resolve_model_config(const Settings& s, const kb::Vocabulary& vocab) {
  model::ModelConfig cfg = s.model;
  if (cfg.encoder.vocab_size == 0) cfg.encoder.vocab_size = vocab.size();
  if (cfg.encoder.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size " + std::to_string(cfg.encoder.vocab_size) + " but the vocabulary has " +
                      std::to_string(vocab.size()) + " entries");
  }
  return cfg;
}

std::vector<int> batch_indices(std::uint64_t seed, int step, int batch_size, int n) {
  if (n <= 0 || batch_size <= 0) throw std::invalid_argument("batch_indices: empty dataset or batch");
  std::vector<int> out;
  std::vector<int> perm;
  std::int64_t perm_epoch = -1;
  for (int k = 0; k < batch_size; ++k) {
    const std::int64_t pos = static_cast<std::int64_t>(step) * batch_size + k;
    const std::int64_t epoch = pos / n;
    if (epoch != perm_epoch) {
      perm.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
      Rng rng = substream(seed, "epoch", static_cast<std::uint64_t>(epoch));
      shuffle(perm, rng);
      perm_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

AdamWConfig adamw_config(const OptimSettings& o) {
  AdamWConfig c;
  c.weight_decay = o.weight_decay;
  c.round_to_f32 = o.round_to_f32;
  return c;
}

namespace {

double checked(const ad::Tensor& t, const char* name, const data::Sample& own, int step) {
  const double v = t.item();
  if (!std::isfinite(v)) throw TrainingError(own.id, name, step, "loss is " + std::to_string(v));
  return v;
}

}  // namespace

StepStats train_step(model::Model& m, AdamW& opt, const obj::EntityTable& entities,
                     std::span<const data::Sample* const> batch, const Settings& s, int step,
                     const Schedule& schedule) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  StepStats st;
  st.step = step;
  st.lr_encoder = s.optim.lr_encoder * schedule.factor(step);
  st.lr_other = s.optim.lr_other * schedule.factor(step);
  const auto& cfg = m.config();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  auto& params = m.params();
  params.zero_grad();
  double l_vk = 0, l_lk = 0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const data::Sample& own = *batch[i];
    Rng rng = substream(s.seed, "sample", static_cast<std::uint64_t>(step), i);
    bool matched = true;
    std::size_t partner = i;
    if (batch.size() > 1 && uniform_real(rng) < s.itm_negative_prob) {
      matched = false;
      partner = uniform_index(rng, batch.size() - 1);
      if (partner >= i) ++partner;
    }
    const auto plan = obj::plan_sample(own, *batch[partner], matched, cfg, s.pretext, entities.size(), rng);
    obj::LossComponents c;
    ad::Tensor total;
    try {
      c = obj::sample_losses(m, entities, own, plan);
      total = obj::total_loss(c, s.pretext.weights, cfg.knowledge);
    } catch (const ad::NonFiniteError& e) {
      throw TrainingError(own.id, "forward", step, e.what());
    }
    st.mlm += checked(c.mlm, "mlm", own, step) * inv_b;
    st.mim += checked(c.mim, "mim", own, step) * inv_b;
    st.itm += checked(c.itm, "itm", own, step) * inv_b;
    if (c.l_vk.defined()) l_vk += checked(c.l_vk, "l_vk", own, step) * inv_b;
    if (c.l_lk.defined()) l_lk += checked(c.l_lk, "l_lk", own, step) * inv_b;
    st.total += checked(total, "total", own, step) * inv_b;
    try {
      ad::backward(total, inv_b);
    } catch (const ad::NonFiniteError& e) {
      throw TrainingError(own.id, "gradient", step, e.what());
    }
  }
  if (cfg.knowledge.ak) {
    st.l_vk = l_vk;
    st.l_lk = l_lk;
  }
  st.grad_norm = clip_grad_norm(params, s.optim.clip_norm);
  if (!std::isfinite(st.grad_norm)) throw TrainingError(batch[0]->id, "gradient", step, "gradient norm is not finite");
  opt.step(params, st.lr_encoder, st.lr_other);
  params.zero_grad();
  return st;
}

std::string metrics_header() { return "step,lr,mlm,mim,itm,l_vk,l_lk,total"; }

std::string metrics_row(const StepStats& st) {
  auto f = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? f(*v) : std::string(); };
  return std::to_string(st.step) + "," + f(st.lr_other) + "," + f(st.mlm) + "," + f(st.mim) + "," + f(st.itm) + "," +
         opt(st.l_vk) + "," + opt(st.l_lk) + "," + f(st.total);
}

TrainedModel load_trained(const Settings& s, const std::filesystem::path& checkpoint) {
  const auto info = read_checkpoint_info(checkpoint);
  TrainedModel t;
  t.settings = s;
  t.settings.model = info.settings.model;
  t.settings.alignment_uses_transe = info.settings.alignment_uses_transe;
  t.data = load_pretrain_data(t.settings, &info.vocab);
  t.model = std::make_unique<model::Model>(t.settings.model, t.settings.seed);
  t.step = load_checkpoint(checkpoint, *t.model).step;
  return t;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%06d", step);
  return out / buf;
}

PretrainResult pretrain(const Settings& s, const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& resume) {
  std::optional<CheckpointInfo> info;
  if (resume) info = read_checkpoint_info(*resume);
  const PretrainData d = load_pretrain_data(s, info ? &info->vocab : nullptr);
  model::Model m(resolve_model_config(s, d.vocab), s.seed);
  AdamW opt(m.params(), adamw_config(s.optim));
  int start = 0;
  if (resume) {
    start = load_checkpoint(*resume, m, &opt).step;
    if (start > s.optim.steps) throw ConfigError("checkpoint step exceeds train.steps");
  }

  std::filesystem::create_directories(out);
  std::ofstream metrics(out / "metrics.csv");
  metrics << metrics_header() << '\n';
  const Schedule schedule{s.optim.steps, s.optim.warmup_fraction};
  PretrainResult result;
  const int n = static_cast<int>(d.train.size());
  for (int step = start; step < s.optim.steps; ++step) {
    std::vector<const data::Sample*> batch;
    for (int idx : batch_indices(s.seed, step, s.optim.batch_size, n)) batch.push_back(d.train[static_cast<std::size_t>(idx)]);
    StepStats st;
    try {
      st = train_step(m, opt, d.entities, batch, s, step, schedule);
    } catch (const TrainingError& e) {
      nlohmann::ordered_json j = {{"step", e.step}, {"sample", e.sample_id}, {"component", e.component},
                                  {"message", e.what()}};
      std::ofstream(out / "nonfinite.json") << j.dump(2) << '\n';
      throw;
    }
    metrics << metrics_row(st) << '\n' << std::flush;
    result.trace.push_back(st);
    if (s.checkpoint_every > 0 && (step + 1) % s.checkpoint_every == 0 && step + 1 < s.optim.steps) {
      save_checkpoint(checkpoint_path(out, step + 1), m, opt, s, d.vocab, step + 1);
    }
  }
  result.final_checkpoint = checkpoint_path(out, s.optim.steps);
  save_checkpoint(result.final_checkpoint, m, opt, s, d.vocab, s.optim.steps);
  return result;
}

}  // namespace kvlp::train
