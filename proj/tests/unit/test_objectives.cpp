#include "doctest.h"
#include "gradcheck.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/kb/text.hpp"
#include "kvlp/objectives/pretext.hpp"
#include "kvlp/synth/generator.hpp"

#include <cmath>
#include <numeric>
#include <set>

using namespace kvlp;
using namespace kvlp::obj;
using kvlp::testing::check_gradients;
using kvlp::testing::random_matrix;

namespace {

model::Linear fixed_linear(const Matrix& w, const Matrix& b) {
  model::Linear l;
  l.w = Tensor(w, true);
  l.b = Tensor(b, true);
  return l;
}

double dense_bce(const Matrix& p, const Matrix& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    s -= y.data()[i] * std::log(p.data()[i]) + (1 - y.data()[i]) * std::log(1 - p.data()[i]);
  }
  return s;
}

model::ModelConfig tiny_config() {
  model::ModelConfig mc;
  auto& e = mc.encoder;
  e.image_height = e.image_width = 16;
  e.patch = 8;
  e.width = 8;
  e.heads = 2;
  e.vision_layers = 1;
  e.text_layers = 1;
  e.vocab_size = 12;
  e.max_text_len = 8;
  e.ffn_mult = 2;
  mc.fusion.layers = 1;
  mc.fusion.width = 8;
  mc.fusion.heads = 2;
  mc.fusion.ffn_mult = 2;
  mc.entity_dim = 3;
  return mc;
}

data::Sample tiny_sample(Rng& rng, std::vector<int> ids, std::vector<std::pair<int, int>> spans,
                         std::vector<int> entity_rows) {
  data::Sample s;
  s.patches = random_matrix(4, 64, rng, 0, 1);
  s.token_ids = std::move(ids);
  s.p = Matrix::Zero(static_cast<Eigen::Index>(s.token_ids.size()), static_cast<Eigen::Index>(spans.size()));
  for (std::size_t k = 0; k < spans.size(); ++k) {
    s.mentions.push_back({"E" + std::to_string(entity_rows[k]), static_cast<std::size_t>(spans[k].first),
                          static_cast<std::size_t>(spans[k].second)});
    for (int t = spans[k].first; t < spans[k].second; ++t) s.p(t, static_cast<Eigen::Index>(k)) = 1;
  }
  s.mention_entities = entity_rows;
  s.entity_set = entity_rows;
  std::sort(s.entity_set.begin(), s.entity_set.end());
  s.entity_set.erase(std::unique(s.entity_set.begin(), s.entity_set.end()), s.entity_set.end());
  return s;
}

EntityTable random_table(Rng& rng, int n, int d) {
  EntityTable t;
  for (int i = 0; i < n; ++i) t.ids.push_back("E" + std::to_string(i));
  t.fusion_vecs = random_matrix(n, d, rng);
  t.alignment_vecs = t.fusion_vecs;
  return t;
}

std::vector<Tensor> all_leaves(const model::ParamStore& ps) {
  std::vector<Tensor> out;
  for (const auto& e : ps.entries()) out.push_back(e.tensor);
  return out;
}

bool is_entity_stream(const std::string& name) {
  for (const char* key : {".sa_e.", ".ca_e.", ".ln_sa_e.", ".ln_ca_e.", ".ln_ff_e.", ".ffn_e."}) {
    if (name.find(key) != std::string::npos) return true;
  }
  return name == "entity.proj";
}

}  // namespace

TEST_CASE("alignment scores") {
  Rng rng(1);
  const Matrix e = random_matrix(5, 3, rng);
  const Tensor h = Tensor(random_matrix(1, 4, rng));
  const auto zero = alignment_scores(h, h, e, Tensor(Matrix::Zero(3, 4)), Tensor(Matrix::Zero(3, 4)));
  CHECK((zero.probs_v().array() == 0.5).all());
  CHECK((zero.probs_l().array() == 0.5).all());

  const Matrix w = random_matrix(3, 4, rng);
  // entity orthogonal to W·h
  Eigen::Vector3d wh = w * h.value().transpose();
  Eigen::Vector3d any(1, 2, 3);
  Eigen::Vector3d orth = any - (any.dot(wh) / wh.squaredNorm()) * wh;
  Matrix eo = e;
  eo.row(2) = orth.transpose();
  CHECK(alignment_scores(h, h, eo, Tensor(w), Tensor(w)).probs_v()(0, 2) == doctest::Approx(0.5).epsilon(1e-12));

  const Matrix w2 = random_matrix(3, 4, rng);
  const Tensor h2 = Tensor(random_matrix(1, 4, rng));
  const auto s = alignment_scores(h, h2, e, Tensor(w), Tensor(w2));
  for (int i = 0; i < 5; ++i) {
    double bv = 0, bl = 0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 4; ++b) {
        bv += e(i, a) * w(a, b) * h.value()(0, b);
        bl += e(i, a) * w2(a, b) * h2.value()(0, b);
      }
    }
    CHECK(s.probs_v()(0, i) == doctest::Approx(1 / (1 + std::exp(-bv))).epsilon(1e-12));
    CHECK(s.probs_l()(0, i) == doctest::Approx(1 / (1 + std::exp(-bl))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(alignment_scores(h, h, random_matrix(5, 2, rng), Tensor(w), Tensor(w)), ad::DimensionError);
}

TEST_CASE("alignment loss") {
  Rng rng(2);
  const Matrix half = Matrix::Constant(1, 7, 0.5);
  Matrix y = Matrix::Zero(1, 7);
  y(0, 3) = 1;
  CHECK(alignment_loss(Tensor(half), y).item() == doctest::Approx(7 * std::log(2.0)));
  CHECK(alignment_loss(Tensor(Matrix::Constant(1, 7, 1e-9)), Matrix::Zero(1, 7)).item() < 1e-7);

  for (int trial = 0; trial < 20; ++trial) {
    const Matrix logits = random_matrix(1, 5, rng, -3, 3);
    Matrix labels(1, 5);
    for (int i = 0; i < 5; ++i) labels(0, i) = uniform_real(rng) < 0.4 ? 1 : 0;
    const Matrix p = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
    const double direct = dense_bce(p, labels);
    CHECK(alignment_loss(Tensor(p), labels).item() == doctest::Approx(direct).epsilon(1e-10));
    CHECK(alignment_loss_from_logits(Tensor(logits), labels).item() == doctest::Approx(direct).epsilon(1e-10));
    // permutation over entity order
    std::vector<int> perm = {4, 2, 0, 1, 3};
    Matrix lp(1, 5), yp(1, 5);
    for (int i = 0; i < 5; ++i) {
      lp(0, i) = logits(0, perm[static_cast<std::size_t>(i)]);
      yp(0, i) = labels(0, perm[static_cast<std::size_t>(i)]);
    }
    CHECK(alignment_loss_from_logits(Tensor(lp), yp).item() == doctest::Approx(direct).epsilon(1e-10));
  }
  std::vector<int> set = {1, 4};
  const Matrix lab = entity_labels(set, 6);
  CHECK(lab.sum() == 2);
  CHECK(lab(0, 4) == 1);
}

TEST_CASE("knowledge_mask definitional cases") {
  Rng rng(3);
  for (int n : {1, 3, 7, 10, 20, 33}) {
    auto plan = knowledge_mask(n, {}, 0.15, rng);
    CHECK(plan.token_positions.size() == static_cast<std::size_t>(std::max(1L, std::lround(0.15 * n))));
    CHECK_FALSE(plan.entity_driven);
  }
  CHECK(knowledge_mask(0, {}, 0.15, rng).token_positions.empty());

  std::vector<kb::EntityMention> one = {{"E", 4, 6}};  // 2 of 10 tokens
  for (int trial = 0; trial < 20; ++trial) {
    auto plan = knowledge_mask(10, one, 0.15, rng);
    CHECK(plan.token_positions == std::vector<int>{4, 5});
    CHECK(plan.sampled_entities == std::vector<int>{0});
  }

  // specials never masked: positions index content tokens only
  std::vector<int> ids = {4, 5, 6, 7, 8, 9};
  auto plan = knowledge_mask(6, {{"E", 0, 1}, {"F", 5, 6}}, 0.5, rng);
  auto masked = apply_token_mask(ids, plan, 12, rng);
  CHECK(masked.size() == ids.size());
  for (int pos : plan.token_positions) {
    CHECK(pos >= 0);
    CHECK(pos < 6);
    CHECK(masked[static_cast<std::size_t>(pos)] == kb::Vocabulary::kMask);
  }
}

TEST_CASE("knowledge mask statistics over 10k synthetic texts") {
  synth::GeneratorConfig cfg;
  const auto kb = synth::generate_kb(cfg);
  const auto eligible = synth::corpus_entity_ids(kb, cfg);
  Rng rng = substream(7, "mask-stats");
  double frac = 0;
  std::size_t sampled = 0, fully = 0;
  for (int i = 0; i < 10000; ++i) {
    const int k = 1 + static_cast<int>(uniform_index(rng, 3));
    std::vector<std::string> subset;
    for (int e : sample_without_replacement(rng, static_cast<int>(eligible.size()), k)) {
      subset.push_back(eligible[static_cast<std::size_t>(e)]);
    }
    const auto pair = synth::generate_pair(kb, subset, cfg, rng);
    const auto linked = kb::link_entities(kb::tokenize(pair.text), kb);
    const auto plan = knowledge_mask(linked, 0.15, rng);
    frac += static_cast<double>(plan.token_positions.size()) / static_cast<double>(linked.num_tokens());
    std::set<int> pos(plan.token_positions.begin(), plan.token_positions.end());
    for (int m : plan.sampled_entities) {
      ++sampled;
      const auto& e = linked.entities[static_cast<std::size_t>(m)];
      bool all = true;
      for (std::size_t t = e.begin; t < e.end; ++t) all = all && pos.count(static_cast<int>(t));
      fully += all;
    }
  }
  frac /= 10000;
  INFO("mean mask fraction " << frac);
  CHECK(frac >= 0.13);
  CHECK(frac <= 0.17);
  CHECK(sampled > 0);
  CHECK(fully == sampled);
}

TEST_CASE("random token mask and patch mask") {
  Rng rng(4);
  std::vector<int> hits(20, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    auto plan = random_token_mask(20, 0.15, rng);
    REQUIRE(plan.token_positions.size() == 3);
    for (int p : plan.token_positions) ++hits[static_cast<std::size_t>(p)];
  }
  // every position equally likely: 3000 expected each, sd ~ 51
  for (int h : hits) CHECK(std::abs(h - 3000) < 300);

  for (int n : {1, 4, 7, 16, 64}) {
    auto idx = patch_mask(n, 0.75, rng);
    CHECK(idx.size() == static_cast<std::size_t>(std::lround(0.75 * n)));
    CHECK(std::set<int>(idx.begin(), idx.end()).size() == idx.size());
    CHECK(std::is_sorted(idx.begin(), idx.end()));
  }
}

TEST_CASE("BERT-style replacement split") {
  Rng rng(5);
  MaskPlan plan;
  plan.replacement = Replacement::kBertSplit;
  for (int i = 0; i < 10000; ++i) plan.token_positions.push_back(i);
  std::vector<int> ids(10000, 7);
  auto out = apply_token_mask(ids, plan, 50, rng);
  int mask = 0, same = 0, other = 0;
  for (int t : out) {
    if (t == kb::Vocabulary::kMask) ++mask;
    else if (t == 7) ++same;
    else ++other;
    CHECK(t != kb::Vocabulary::kStart);
  }
  CHECK(std::abs(mask - 8000) < 250);
  CHECK(std::abs(same + other - 2000) < 250);
  CHECK(other > 800);
}

TEST_CASE("mlm loss") {
  Rng rng(6);
  const int V = 9;
  const Tensor zl(random_matrix(6, 4, rng));
  std::vector<int> pos = {0, 2, 3}, tgt = {5, 1, 8};
  const auto uniform = fixed_linear(Matrix::Zero(4, V), Matrix::Zero(1, V));
  CHECK(mlm_loss(zl, pos, tgt, uniform).item() == doctest::Approx(std::log(9.0)));

  Matrix big = Matrix::Zero(1, V);
  big(0, 5) = 60;
  std::vector<int> p1 = {1}, t1 = {5};
  CHECK(mlm_loss(zl, p1, t1, fixed_linear(Matrix::Zero(4, V), big)).item() < 1e-12);

  const auto head = fixed_linear(random_matrix(4, V, rng), random_matrix(1, V, rng));
  double expect = 0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    std::vector<double> logit(V);
    for (int c = 0; c < V; ++c) {
      double s = head.b.value()(0, c);
      for (int a = 0; a < 4; ++a) s += zl.value()(pos[k] + 1, a) * head.w.value()(a, c);
      logit[static_cast<std::size_t>(c)] = s;
    }
    double z = 0;
    for (double l : logit) z += std::exp(l);
    expect += -(logit[static_cast<std::size_t>(tgt[k])] - std::log(z)) / 3.0;
  }
  CHECK(mlm_loss(zl, pos, tgt, head).item() == doctest::Approx(expect).epsilon(1e-12));

  const auto before = mlm_empty_mask_count();
  CHECK(mlm_loss(zl, {}, {}, head).item() == 0.0);
  CHECK(mlm_empty_mask_count() == before + 1);
  std::vector<int> bad = {4};
  CHECK_THROWS_AS(mlm_loss(zl, bad, t1, head), std::out_of_range);  // row 5 is [SEP]
}

TEST_CASE("mim loss") {
  Rng rng(7);
  const Matrix patches = random_matrix(3, 4, rng, 0, 1);
  Matrix zv = Matrix::Zero(4, 4);
  zv.bottomRows(3) = patches;
  const auto identity = fixed_linear(Matrix::Identity(4, 4), Matrix::Zero(1, 4));
  std::vector<int> idx = {0, 2};
  CHECK(mim_loss(Tensor(zv), idx, patches, identity).item() == 0.0);
  const auto zero = fixed_linear(Matrix::Zero(4, 4), Matrix::Zero(1, 4));
  CHECK(mim_loss(Tensor(zv), idx, Matrix::Constant(3, 4, 0.5), zero).item() == doctest::Approx(0.25));

  const Matrix z2 = random_matrix(4, 4, rng);
  const auto head = fixed_linear(random_matrix(4, 4, rng), random_matrix(1, 4, rng));
  double expect = 0;
  for (int k : idx) {
    for (int c = 0; c < 4; ++c) {
      double s = head.b.value()(0, c);
      for (int a = 0; a < 4; ++a) s += z2(k + 1, a) * head.w.value()(a, c);
      expect += (s - patches(k, c)) * (s - patches(k, c)) / 8.0;
    }
  }
  CHECK(mim_loss(Tensor(z2), idx, patches, head).item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("itm loss") {
  CHECK(itm_loss(Tensor(Matrix::Zero(1, 2)), true).item() == doctest::Approx(std::log(2.0)));
  Matrix conf(1, 2);
  conf << -40, 40;
  CHECK(itm_loss(Tensor(conf), true).item() < 1e-12);
  CHECK(itm_loss(Tensor(conf), false).item() == doctest::Approx(80.0));

  // batch of 4, samples 1 and 3 swapped to negatives
  Rng rng(8);
  const Matrix logits = random_matrix(4, 2, rng, -2, 2);
  const bool matched[4] = {true, false, true, false};
  double hand = 0, got = 0;
  for (int i = 0; i < 4; ++i) {
    const double lse = std::log(std::exp(logits(i, 0)) + std::exp(logits(i, 1)));
    hand += (lse - logits(i, matched[i] ? 1 : 0)) / 4;
    got += itm_loss(Tensor(Matrix(logits.row(i))), matched[i]).item() / 4;
  }
  CHECK(got == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("total loss") {
  LossComponents c;
  c.mlm = Tensor::scalar(1.5);
  model::KnowledgeToggles k;
  CHECK(total_loss(c, {}, k).item() == 1.5);
  c.mim = Tensor::scalar(0.25);
  c.itm = Tensor::scalar(0.75);
  c.l_vk = Tensor::scalar(2.0);
  c.l_lk = Tensor::scalar(3.0);
  CHECK(total_loss(c, {0, 0, 0, 0, 0}, k).item() == 0.0);
  LossWeights w{0.3, 1.7, 0.2, 0.9, 1.1};
  CHECK(total_loss(c, w, k).item() == doctest::Approx(0.3 * 1.5 + 1.7 * 0.25 + 0.2 * 0.75 + 0.9 * 2 + 1.1 * 3));
  k.ak = false;
  CHECK(total_loss(c, w, k).item() == doctest::Approx(0.3 * 1.5 + 1.7 * 0.25 + 0.2 * 0.75));
}

TEST_CASE("full model gradient check on the summed objective (D=8, one layer per stack)") {
  Rng rng(9);
  model::Model m(tiny_config(), 3);
  for (const auto& e : m.params().entries()) {
    Tensor t = e.tensor;
    t.mutable_value() += random_matrix(t.rows(), t.cols(), rng, -0.2, 0.2);
  }
  const auto table = random_table(rng, 5, 3);
  const auto own = tiny_sample(rng, {4, 5, 6, 7, 8, 9}, {{1, 3}, {4, 5}}, {0, 3});
  const auto other = tiny_sample(rng, {10, 4, 11}, {{0, 1}}, {2});
  PretextOptions opts;
  opts.mlm_ratio = 0.3;
  for (bool matched : {true, false}) {
    Rng plan_rng(10);
    const auto plan = plan_sample(own, matched ? own : other, matched, m.config(), opts, table.size(), plan_rng);
    auto loss = [&] { return total_loss(sample_losses(m, table, own, plan), opts.weights, m.config().knowledge); };
    auto res = check_gradients(loss, all_leaves(m.params()), 1e-4, 40);
    INFO(res.worst);
    CHECK(res.max_rel_error <= 1e-3);
    CHECK(res.checked > 1000);
  }
}

TEST_CASE("ablation isolation of gradients") {
  Rng rng(11);
  const auto table = random_table(rng, 5, 3);
  const auto own = tiny_sample(rng, {4, 5, 6, 7, 8, 9}, {{1, 3}, {4, 5}}, {0, 3});
  for (int variant = 0; variant < 3; ++variant) {
    auto cfg = tiny_config();
    if (variant == 1) cfg.knowledge.ak = false;
    if (variant == 2) cfg.knowledge.rk = false;
    model::Model m(cfg, 4);
    Rng plan_rng(12);
    const auto plan = plan_sample(own, own, true, m.config(), {}, table.size(), plan_rng);
    ad::backward(total_loss(sample_losses(m, table, own, plan), {}, m.config().knowledge));
    for (const auto& e : m.params().entries()) {
      const double g = e.tensor.grad().cwiseAbs().sum();
      const bool align = e.name == "align.w_vk" || e.name == "align.w_lk";
      INFO(variant << " " << e.name);
      if (variant == 1 && align) CHECK(g == 0.0);
      if (variant == 2 && is_entity_stream(e.name)) CHECK(g == 0.0);
      if (variant == 0 && (align || e.name == "entity.proj")) CHECK(g > 0.0);
    }
  }
}

TEST_CASE("LK off turns knowledge masking into random masking") {
  Rng rng(13);
  auto cfg = tiny_config();
  cfg.knowledge.lk = false;
  const auto own = tiny_sample(rng, {4, 5, 6, 7, 8, 9, 10, 11}, {{1, 3}}, {0});
  std::vector<int> hits(8, 0);
  for (int t = 0; t < 8000; ++t) {
    auto plan = plan_sample(own, own, true, cfg, {}, 5, rng);
    CHECK(plan.mask.sampled_entities.empty());
    REQUIRE(plan.mask.token_positions.size() == 1);
    ++hits[static_cast<std::size_t>(plan.mask.token_positions[0])];
  }
  for (int h : hits) CHECK(std::abs(h - 1000) < 150);
}

TEST_CASE("negative-entity cap keeps positives and samples the rest") {
  Rng rng(14);
  const auto own = tiny_sample(rng, {4, 5, 6}, {{0, 1}}, {7});
  PretextOptions opts;
  opts.max_negative_entities = 3;
  auto plan = plan_sample(own, own, true, tiny_config(), opts, 20, rng);
  CHECK(plan.alignment_rows.size() == 4);
  CHECK(std::binary_search(plan.alignment_rows.begin(), plan.alignment_rows.end(), 7));
}
