#include "kvlp/eval/ablation.hpp"
#include "kvlp/eval/classify.hpp"
#include "kvlp/eval/diagnostics.hpp"
#include "kvlp/eval/retrieval.hpp"
#include "kvlp/train/checkpoint.hpp"
#include "kvlp/train/pipeline.hpp"
#include "kvlp/train/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

using namespace kvlp;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "root seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--set", c.overrides, "extra key=value overrides, e.g. --set train.steps=200");
}

train::Settings resolve(const Common& c, CLI::App* cmd) {
  Config cfg = c.config.empty() ? Config() : Config::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed") > 0) cfg.set("seed", std::to_string(c.seed));
  return train::settings_from_config(cfg);
}

void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << '\n';
}

bool monotone(const eval::RetrievalReport& r) { return r.r1 <= r.r5 && r.r5 <= r.r10 && r.r10 <= 1.0; }

int report_retrieval(const eval::RetrievalReports& r, const std::filesystem::path& out, const std::string& stem) {
  std::filesystem::create_directories(out);
  eval::write_reports({r.t2i, r.i2t}, out / (stem + ".json"), out / (stem + ".csv"));
  for (const auto& rep : {r.t2i, r.i2t}) {
    std::cout << eval::to_string(rep.direction) << " (" << eval::to_string(rep.mode) << ", pool " << rep.pool
              << "): R@1 " << rep.r1 << "  R@5 " << rep.r5 << "  R@10 " << rep.r10 << '\n';
  }
  if (!monotone(r.t2i) || !monotone(r.i2t)) {
    std::cerr << "recall is not monotone in K\n";
    return 3;
  }
  return 0;
}

kb::Split parse_split_arg(const std::string& s) { return kb::parse_split(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-enhanced vision-language pre-training at desk scale"};
  app.require_subcommand(1);

  Common gen, extract, kge, pre, ft, ev, abl, diag;
  auto* c_gen = app.add_subcommand("gen-corpus", "write a synthetic corpus (images, texts, KB)");
  add_common(c_gen, gen);

  auto* c_extract = app.add_subcommand("extract-kb", "restrict the corpus KB to entities linked in its texts");
  add_common(c_extract, extract);

  auto* c_kge = app.add_subcommand("train-kge", "TransE embeddings plus graph attention parameters");
  add_common(c_kge, kge);

  auto* c_pre = app.add_subcommand("pretrain", "joint pre-training; writes metrics.csv and checkpoints");
  add_common(c_pre, pre);
  std::string resume;
  c_pre->add_option("--resume", resume, "checkpoint directory to continue from")->check(CLI::ExistingDirectory);

  auto* c_ft = app.add_subcommand("finetune", "downstream fine-tuning");
  c_ft->require_subcommand(1);
  std::string ft_ckpt, cls_entity;
  auto* c_ftr = c_ft->add_subcommand("retrieval", "similarity head from the ITM head, 15 sampled negatives");
  add_common(c_ftr, ft);
  c_ftr->add_option("--checkpoint", ft_ckpt, "pre-trained checkpoint")->required()->check(CLI::ExistingDirectory);
  Common cls;
  std::string cls_ckpt;
  auto* c_ftc = c_ft->add_subcommand("classify", "two-layer MLP over the fused aggregates (glyph presence)");
  add_common(c_ftc, cls);
  c_ftc->add_option("--checkpoint", cls_ckpt, "pre-trained checkpoint")->required()->check(CLI::ExistingDirectory);
  c_ftc->add_option("--entity", cls_entity, "entity whose presence is the label (default: most frequent)");

  auto* c_ev = app.add_subcommand("evaluate", "zero-shot retrieval on a split");
  add_common(c_ev, ev);
  std::string ev_ckpt, ev_split = "test";
  c_ev->add_option("--checkpoint", ev_ckpt, "checkpoint to evaluate")->required()->check(CLI::ExistingDirectory);
  c_ev->add_option("--split", ev_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* c_abl = app.add_subcommand("ablate", "eight AK/RK/LK configurations, zero-shot R@1 each");
  add_common(c_abl, abl);

  auto* c_diag = app.add_subcommand("dump-diagnostics", "alignment scores, attention maps and embeddings for one pair");
  add_common(c_diag, diag);
  std::string diag_ckpt, diag_sample;
  c_diag->add_option("--checkpoint", diag_ckpt, "checkpoint")->required()->check(CLI::ExistingDirectory);
  c_diag->add_option("--sample", diag_sample, "pair id (default: first test pair)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_gen) {
      auto s = resolve(gen, c_gen);
      train::generate_corpus(s, gen.out);
      std::cout << "corpus written to " << gen.out << '\n';
    } else if (*c_extract) {
      auto s = resolve(extract, c_extract);
      const auto kb = train::extract_kb(s, extract.out);
      std::cout << kb.num_entities() << " entities, " << kb.num_triples() << " triples\n";
    } else if (*c_kge) {
      auto s = resolve(kge, c_kge);
      const auto a = train::train_kge(s, kge.out);
      std::cout << a.embeddings.entity_ids.size() << " entity vectors of width " << a.embeddings.dim() << '\n';
    } else if (*c_pre) {
      auto s = resolve(pre, c_pre);
      const auto r = resume.empty() ? train::pretrain(s, pre.out) : train::pretrain(s, pre.out, resume);
      std::cout << "final checkpoint " << r.final_checkpoint.string() << '\n';
    } else if (*c_ftr) {
      auto s = resolve(ft, c_ftr);
      auto t = train::load_trained(s, ft_ckpt);
      const auto test = data::split_view(t.data.samples, kb::Split::kTest);
      const auto zs = eval::rank_retrieval(eval::score_matrix(*t.model, t.data.entities, test, test));
      const auto log = eval::finetune_retrieval(*t.model, t.data.entities, t.data.train, s.finetune, s.seed);
      const auto fted =
          eval::rank_retrieval(eval::score_matrix(*t.model, t.data.entities, test, test), eval::Mode::kFineTuned);
      train::AdamW opt(t.model->params(), train::AdamWConfig{});
      train::save_checkpoint(std::filesystem::path(ft.out) / "checkpoint", *t.model, opt, t.settings, t.data.vocab,
                             t.step);
      write_json(std::filesystem::path(ft.out) / "finetune_log.json",
                 {{"epoch_loss", log.epoch_loss}, {"updates", log.updates}});
      const int a = report_retrieval(zs, ft.out, "zero_shot");
      const int b = report_retrieval(fted, ft.out, "fine_tuned");
      return a ? a : b;
    } else if (*c_ftc) {
      auto s = resolve(cls, c_ftc);
      auto t = train::load_trained(s, cls_ckpt);
      int target = -1;
      if (!cls_entity.empty()) {
        const auto& ids = t.data.entities.ids;
        const auto it = std::find(ids.begin(), ids.end(), cls_entity);
        if (it == ids.end()) throw std::invalid_argument("unknown entity " + cls_entity);
        target = static_cast<int>(it - ids.begin());
      } else {
        std::vector<int> counts(static_cast<std::size_t>(t.data.entities.size()), 0);
        for (const auto* x : t.data.train) {
          for (int e : x->entity_set) ++counts[static_cast<std::size_t>(e)];
        }
        target = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      }
      const auto test = data::split_view(t.data.samples, kb::Split::kTest);
      const auto r = eval::finetune_classifier(*t.model, t.data.entities, t.data.train,
                                               eval::presence_labels(t.data.train, target), test,
                                               eval::presence_labels(test, target), 2, false, s.finetune, s.seed);
      write_json(std::filesystem::path(cls.out) / "classify.json",
                 {{"entity", t.data.entities.ids[static_cast<std::size_t>(target)]},
                  {"accuracy", r.accuracy},
                  {"initial_loss", r.initial_loss},
                  {"epoch_loss", r.epoch_loss}});
      std::cout << "accuracy " << r.accuracy << " on " << test.size() << " test pairs\n";
    } else if (*c_ev) {
      auto s = resolve(ev, c_ev);
      auto t = train::load_trained(s, ev_ckpt);
      const auto pool = data::split_view(t.data.samples, parse_split_arg(ev_split));
      return report_retrieval(eval::rank_retrieval(eval::score_matrix(*t.model, t.data.entities, pool, pool)), ev.out,
                              "retrieval");
    } else if (*c_abl) {
      auto s = resolve(abl, c_abl);
      const auto g = eval::run_ablation(s, abl.out);
      eval::write_ablation(g, abl.out);
      for (const auto& r : g.rows) {
        std::cout << "ID " << r.id << "  AK " << r.knowledge.ak << " RK " << r.knowledge.rk << " LK " << r.knowledge.lk
                  << "  T2I R@1 " << r.zero_shot.t2i.r1 << "  I2T R@1 " << r.zero_shot.i2t.r1 << '\n';
      }
      if (!g.full_not_below_baseline()) {
        std::cerr << "ID 8 scored below ID 1\n";
        return 4;
      }
    } else if (*c_diag) {
      auto s = resolve(diag, c_diag);
      auto t = train::load_trained(s, diag_ckpt);
      const data::Sample* pick = nullptr;
      for (const auto& x : t.data.samples) {
        if (diag_sample.empty() ? x.split == kb::Split::kTest : x.id == diag_sample) {
          pick = &x;
          break;
        }
      }
      if (!pick) throw std::invalid_argument("no pair " + (diag_sample.empty() ? std::string("in the test split") : diag_sample));
      const auto sum = eval::dump_diagnostics(*t.model, t.data.entities, *pick, t.data.vocab, diag.out);
      std::cout << "pair " << pick->id << ": " << sum.n_entities << " entities, " << sum.text_len << " text tokens, "
                << sum.n_mentions << " mentions, " << sum.n_visual << " visual tokens\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
