#include "kvlp/train/settings.hpp"

#include "kvlp/util/rng.hpp"

#include <cstdio>
#include <sstream>

namespace kvlp::train {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

// One table drives parsing, dumping and the known-key check.
template <typename Visitor>
void visit(Settings& s, Visitor&& v) {
  auto& e = s.model.encoder;
  auto& f = s.model.fusion;
  auto& k = s.model.knowledge;
  auto& o = s.optim;
  auto& ft = s.finetune;
  auto& g = s.generator;
  v("seed", s.seed);
  v("corpus_dir", s.corpus_dir);
  v("kb_dir", s.kb_dir);
  v("kge_dir", s.kge_dir);
  v("model.image_size", e.image_height);
  v("model.channels", e.channels);
  v("model.patch", e.patch);
  v("model.width", e.width);
  v("model.heads", e.heads);
  v("model.vision_layers", e.vision_layers);
  v("model.text_layers", e.text_layers);
  v("model.fusion_layers", f.layers);
  v("model.max_text_len", e.max_text_len);
  v("model.ffn_mult", e.ffn_mult);
  v("model.vocab_size", e.vocab_size);  // 0: taken from the training vocabulary
  v("model.post_norm", e.norm);
  v("model.normalize_p", f.normalize_p);
  v("knowledge.ak", k.ak);
  v("knowledge.rk", k.rk);
  v("knowledge.lk", k.lk);
  v("knowledge.alignment_uses_transe", s.alignment_uses_transe);
  v("knowledge.max_negative_entities", s.pretext.max_negative_entities);
  v("pretext.mlm_ratio", s.pretext.mlm_ratio);
  v("pretext.mim_ratio", s.pretext.mim_ratio);
  v("pretext.bert_split", s.pretext.replacement);
  v("pretext.itm_negative_prob", s.itm_negative_prob);
  v("loss.mlm", s.pretext.weights.mlm);
  v("loss.mim", s.pretext.weights.mim);
  v("loss.itm", s.pretext.weights.itm);
  v("loss.l_vk", s.pretext.weights.l_vk);
  v("loss.l_lk", s.pretext.weights.l_lk);
  v("train.steps", o.steps);
  v("train.batch_size", o.batch_size);
  v("train.lr_encoder", o.lr_encoder);
  v("train.lr_other", o.lr_other);
  v("train.warmup_fraction", o.warmup_fraction);
  v("train.weight_decay", o.weight_decay);
  v("train.clip_norm", o.clip_norm);
  v("train.round_to_f32", o.round_to_f32);
  v("train.checkpoint_every", s.checkpoint_every);
  v("finetune.retrieval_epochs", ft.retrieval_epochs);
  v("finetune.retrieval_negatives", ft.retrieval_negatives);
  v("finetune.retrieval_lr", ft.retrieval_lr);
  v("finetune.classify_epochs", ft.classify_epochs);
  v("finetune.classify_lr", ft.classify_lr);
  v("finetune.classify_freeze_backbone", ft.classify_freeze_backbone);
  v("finetune.classify_hidden", ft.classify_hidden);
  v("kge.dim", s.transe.dim);
  v("kge.margin", s.transe.margin);
  v("kge.lr", s.transe.lr);
  v("kge.epochs", s.transe.epochs);
  v("kge.neg_per_pos", s.transe.neg_per_pos);
  v("corpus.n_entities", g.n_entities);
  v("corpus.n_distractors", g.n_distractors);
  v("corpus.n_relations", g.n_relations);
  v("corpus.triple_density", g.triple_density);
  v("corpus.n_pairs", g.n_pairs);
  v("corpus.entities_per_pair", g.entities_per_pair);
  v("corpus.image_size", g.image_size);
  v("corpus.glyph_cell", g.glyph_cell);
  v("corpus.n_filler", g.n_filler);
  v("corpus.filler_min", g.filler_min);
  v("corpus.filler_max", g.filler_max);
}

struct Reader {
  const Config& c;
  void operator()(const char* k, std::uint64_t& x) const { x = c.get_u64(k, x); }
  void operator()(const char* k, std::string& x) const { x = c.get_string(k, x); }
  void operator()(const char* k, int& x) const { x = c.get_int(k, x); }
  void operator()(const char* k, double& x) const { x = c.get_double(k, x); }
  void operator()(const char* k, bool& x) const { x = c.get_bool(k, x); }
  void operator()(const char* k, model::NormOrder& x) const {
    x = c.get_bool(k, x == model::NormOrder::kPost) ? model::NormOrder::kPost : model::NormOrder::kPre;
  }
  void operator()(const char* k, obj::Replacement& x) const {
    x = c.get_bool(k, x == obj::Replacement::kBertSplit) ? obj::Replacement::kBertSplit : obj::Replacement::kMaskToken;
  }
};

struct Writer {
  Config& c;
  template <typename T>
  void operator()(const char* k, const T& x) const { c.set(k, fmt(x)); }
  void operator()(const char* k, const std::string& x) const { c.set(k, x); }
  void operator()(const char* k, const model::NormOrder& x) const { c.set(k, fmt(x == model::NormOrder::kPost)); }
  void operator()(const char* k, const obj::Replacement& x) const {
    c.set(k, fmt(x == obj::Replacement::kBertSplit));
  }
};

}  // namespace

Settings settings_from_config(const Config& c) {
  Settings s;
  std::set<std::string> known;
  visit(s, [&](const char* k, auto&) { known.insert(k); });
  c.require_known(known);
  visit(s, Reader{c});
  s.model.encoder.image_width = s.model.encoder.image_height;
  s.model.fusion.width = s.model.encoder.width;
  s.model.fusion.heads = s.model.encoder.heads;
  s.model.fusion.ffn_mult = s.model.encoder.ffn_mult;
  s.model.fusion.rk_enabled = s.model.knowledge.rk;
  s.model.entity_dim = s.transe.dim;
  s.transe.seed = s.seed;
  s.generator.seed = s.seed;
  if (s.optim.batch_size < 1 || s.optim.steps < 0) throw ConfigError("train.steps >= 0 and train.batch_size >= 1 required");
  if (s.optim.warmup_fraction < 0 || s.optim.warmup_fraction > 1) throw ConfigError("train.warmup_fraction must lie in [0, 1]");
  return s;
}

Config settings_to_config(const Settings& s) {
  Config c;
  Settings copy = s;
  visit(copy, Writer{c});
  return c;
}

std::uint64_t architecture_hash(const model::ModelConfig& m) {
  const auto& e = m.encoder;
  const auto& f = m.fusion;
  std::ostringstream key;
  key << e.image_height << 'x' << e.image_width << 'x' << e.channels << " p" << e.patch << " d" << e.width << " h"
      << e.heads << " lv" << e.vision_layers << " ll" << e.text_layers << " v" << e.vocab_size << " t" << e.max_text_len
      << " f" << e.ffn_mult << " n" << static_cast<int>(e.norm) << " lm" << f.layers << " de" << m.entity_dim;
  return fnv1a(key.str());
}

}  // namespace kvlp::train
