#include "doctest.h"
#include "gradcheck.hpp"
#include "temp_dir.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/kge/gat.hpp"
#include "kvlp/kge/kge_io.hpp"
#include "kvlp/kge/transe.hpp"
#include "kvlp/util/binary_io.hpp"
#include "kvlp/util/rng.hpp"

#include <cmath>
#include <set>

using namespace kvlp;
using namespace kvlp::kge;
using kvlp::testing::TempDir;

namespace {

std::vector<std::string> ids(const char* prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// e0 -> e1 -> ... -> e5 under r0, the reverse under r1.
std::vector<kb::Triple> chain_graph() {
  std::vector<kb::Triple> g;
  for (int i = 0; i + 1 < 6; ++i) {
    g.push_back({"e" + std::to_string(i), "r0", "e" + std::to_string(i + 1)});
    g.push_back({"e" + std::to_string(i + 1), "r1", "e" + std::to_string(i)});
  }
  return g;
}

double norm_of(const Eigen::RowVectorXd& v) {
  double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i) * v(i);
  return std::sqrt(s);
}

// Exhaustive filtered ranking: every candidate tail scored explicitly.
double exhaustive_hits1(const KGEmbeddings& emb, const std::vector<IndexedTriple>& g) {
  int hits = 0;
  for (const auto& t : g) {
    std::vector<std::pair<double, int>> scored;
    for (int c = 0; c < static_cast<int>(emb.entity_vecs.rows()); ++c) {
      bool other_true = false;
      for (const auto& u : g) other_true |= (u.head == t.head && u.relation == t.relation && u.tail == c && c != t.tail);
      if (other_true) continue;
      scored.push_back({norm_of(emb.entity_vecs.row(t.head) + emb.relation_vecs.row(t.relation) -
                                emb.entity_vecs.row(c)),
                        c});
    }
    std::sort(scored.begin(), scored.end());
    hits += scored.front().second == t.tail && (scored.size() == 1 || scored[1].first > scored[0].first);
  }
  return static_cast<double>(hits) / static_cast<double>(g.size());
}

Matrix random_rows(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2 * uniform_real(rng) - 1;
  return m;
}

// GAT formula evaluated densely: full N×N logit matrix with -inf outside the neighbourhood.
Matrix dense_gat(const Matrix& e, const Matrix& adjacency, const GraphAttentionParams& p) {
  const auto n = e.rows();
  const auto d = e.cols();
  Matrix z(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < d; ++a) {
      double s = 0;
      for (Eigen::Index b = 0; b < d; ++b) s += p.transform(a, b) * e(i, b);
      z(i, a) = s;
    }
  }
  Matrix out = Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    double total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) == 0 && i != j) continue;
      double x = 0;
      for (Eigen::Index a = 0; a < d; ++a) x += p.attention_vec(0, a) * z(i, a) + p.attention_vec(0, d + a) * z(j, a);
      x = x > 0 ? x : p.leaky_slope * x;
      w[static_cast<std::size_t>(j)] = std::exp(x);
      total += std::exp(x);
    }
    for (Eigen::Index j = 0; j < n; ++j) out.row(i) += (w[static_cast<std::size_t>(j)] / total) * z.row(j);
  }
  return out;
}

}  // namespace

TEST_CASE("transe_score examples") {
  Eigen::RowVectorXd h(3), r(3), t(3);
  h << 0.1, 0.2, 0.3;
  r << 0.5, -0.1, 0.0;
  t = h + r;
  CHECK(transe_score(h, r, t) == doctest::Approx(0.0));
  Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(4), e1 = Eigen::RowVectorXd::Zero(4);
  e1(2) = 1;
  CHECK(transe_score(z, z, e1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(transe_score(h, r, e1), ad::DimensionError);

  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    Matrix m = random_rows(4, 8, rng);
    double s = 0;
    for (int i = 0; i < 8; ++i) s += std::pow(m(0, i) + m(1, i) - m(2, i), 2);
    CHECK(transe_score(m.row(0), m.row(1), m.row(2)) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
    // translation covariance
    CHECK(transe_score(m.row(0) + m.row(3), m.row(1), m.row(2) + m.row(3)) ==
          doctest::Approx(transe_score(m.row(0), m.row(1), m.row(2))).epsilon(1e-12));
  }
}

TEST_CASE("train_transe argument checks") {
  TransEConfig cfg;
  CHECK_THROWS_AS(train_transe(ids("e", 2), ids("r", 1), {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_transe(ids("e", 2), ids("r", 1), {{"e0", "r0", "e9"}}, cfg), std::invalid_argument);
}

TEST_CASE("single triple converges") {
  // With two entities the only negative scores ||r||, so at margin 1 the hinge
  // goes flat once ||r|| >= 1 + pos; margin 2 keeps it active until pos ~ 0.
  TransEConfig cfg;
  cfg.epochs = 200;
  cfg.margin = 2.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    auto emb = train_transe(ids("e", 2), ids("r", 1), {{"e0", "r0", "e1"}}, cfg);
    CHECK(transe_score(emb.entity_vecs.row(0), emb.relation_vecs.row(0), emb.entity_vecs.row(1)) < 0.1);
  }
  std::vector<double> losses;
  cfg = TransEConfig{};
  train_transe(ids("e", 2), ids("r", 1), {{"e0", "r0", "e1"}}, cfg, &losses);
  CHECK(losses.back() == 0.0);
}

TEST_CASE("zero margin and zero lr leave the initialization untouched") {
  TransEConfig cfg;
  cfg.epochs = 0;
  auto init = train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg);
  cfg.epochs = 20;
  cfg.lr = 0;
  cfg.margin = 0;
  auto after = train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg);
  CHECK(after.entity_vecs == init.entity_vecs);
  CHECK(after.relation_vecs == init.relation_vecs);
}

TEST_CASE("chain graph: filtered top-1 tail ranking and score separation") {
  TransEConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 500;
  const auto ents = ids("e", 6), rels = ids("r", 2);
  std::vector<double> losses;
  auto emb = train_transe(ents, rels, chain_graph(), cfg, &losses);
  const auto g = index_triples(chain_graph(), ents, rels);
  const double hits = exhaustive_hits1(emb, g);
  CHECK(hits >= 0.9);
  CHECK(filtered_tail_hits_at_1(emb, g) == doctest::Approx(hits));

  double pos = 0, neg = 0;
  int n_neg = 0;
  for (const auto& t : g) {
    pos += transe_score(emb.entity_vecs.row(t.head), emb.relation_vecs.row(t.relation), emb.entity_vecs.row(t.tail));
    for (int c = 0; c < 6; ++c) {
      if (c != t.tail) {
        neg += transe_score(emb.entity_vecs.row(t.head), emb.relation_vecs.row(t.relation), emb.entity_vecs.row(c));
        ++n_neg;
      }
      if (c != t.head) {
        neg += transe_score(emb.entity_vecs.row(c), emb.relation_vecs.row(t.relation), emb.entity_vecs.row(t.tail));
        ++n_neg;
      }
    }
  }
  CHECK(pos / static_cast<double>(g.size()) < neg / n_neg);
  REQUIRE(losses.size() == 500);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("entity rows stay in the unit ball after every epoch and training is reproducible") {
  TransEConfig cfg;
  cfg.dim = 8;
  cfg.lr = 0.2;  // large steps push rows outside the ball mid-epoch
  for (int epochs : {1, 2, 7}) {
    cfg.epochs = epochs;
    auto emb = train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg);
    for (Eigen::Index i = 0; i < emb.entity_vecs.rows(); ++i) CHECK(emb.entity_vecs.row(i).norm() <= 1 + 1e-6);
  }
  auto a = train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg);
  auto b = train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg);
  CHECK(a.entity_vecs == b.entity_vecs);
  CHECK(a.relation_vecs == b.relation_vecs);
  cfg.seed = 2;
  CHECK_FALSE(train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg).entity_vecs == a.entity_vecs);
}

TEST_CASE("gat_aggregate examples") {
  Rng rng(4);
  KGEmbeddings emb;
  emb.entity_ids = ids("e", 3);
  emb.entity_vecs = random_rows(3, 4, rng);
  emb.relation_vecs = random_rows(1, 4, rng);
  GraphAttentionParams p;
  p.transform = random_rows(4, 4, rng);
  p.attention_vec = random_rows(1, 8, rng);

  SUBCASE("isolated node") {
    auto res = gat_aggregate(emb, {{0, 0, 1}}, p);
    const Eigen::RowVectorXd expect = (p.transform * emb.entity_vecs.row(2).transpose()).transpose();
    CHECK((res.aggregated.row(2) - expect).norm() < 1e-12);
    REQUIRE(res.attention[2].size() == 1);
    CHECK(res.attention[2][0].second == 1.0);
  }
  SUBCASE("neighbours identical to the node") {
    emb.entity_vecs.row(1) = emb.entity_vecs.row(0);
    emb.entity_vecs.row(2) = emb.entity_vecs.row(0);
    auto res = gat_aggregate(emb, {{0, 0, 1}, {2, 0, 0}}, p);
    const Eigen::RowVectorXd expect = (p.transform * emb.entity_vecs.row(0).transpose()).transpose();
    CHECK((res.aggregated.row(0) - expect).norm() < 1e-12);
  }
}

TEST_CASE("gat_aggregate on a 4-node star matches the dense formula") {
  Rng rng(12);
  KGEmbeddings emb;
  emb.entity_vecs = random_rows(4, 4, rng);
  GraphAttentionParams p;
  p.transform = random_rows(4, 4, rng);
  p.attention_vec = random_rows(1, 8, rng);
  p.leaky_slope = 0.2;
  std::vector<IndexedTriple> star = {{0, 0, 1}, {2, 0, 0}, {0, 1, 3}};
  Matrix adj = Matrix::Zero(4, 4);
  for (int k = 1; k < 4; ++k) adj(0, k) = adj(k, 0) = 1;
  auto res = gat_aggregate(emb, star, p);
  CHECK((res.aggregated - dense_gat(emb.entity_vecs, adj, p)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.attention[0].size() == 4);
  CHECK(res.attention[1].size() == 2);
}

TEST_CASE("attention coefficients are a distribution over each neighbourhood") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 12));
    KGEmbeddings emb;
    emb.entity_vecs = random_rows(n, 5, rng);
    std::vector<IndexedTriple> g;
    Matrix adj = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      const int h = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      const int t = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      g.push_back({h, 0, t});
      adj(h, t) = adj(t, h) = 1;
    }
    auto p = GraphAttentionParams::identity(5, static_cast<std::uint64_t>(trial));
    auto res = gat_aggregate(emb, g, p);
    CHECK((res.aggregated - dense_gat(emb.entity_vecs, adj, p)).cwiseAbs().maxCoeff() < 1e-10);
    for (const auto& row : res.attention) {
      double s = 0;
      for (const auto& [j, a] : row) {
        CHECK(a >= 0.0);
        s += a;
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("project_entities") {
  Rng rng(2);
  ad::Tensor agg(random_rows(5, 4, rng));
  CHECK(project_entities(agg, ad::Tensor(Matrix::Identity(4, 4))).value() == agg.value());
  CHECK(project_entities(agg, ad::Tensor(Matrix::Zero(4, 6))).value().isZero());
  Matrix w = random_rows(4, 3, rng);
  Matrix expect = Matrix::Zero(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) expect(i, j) += agg.value()(i, k) * w(k, j);
  CHECK((project_entities(agg, ad::Tensor(w)).value() - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(project_entities(agg, ad::Tensor(Matrix::Zero(3, 3))), ad::DimensionError);

  ad::Tensor wt(w, true);
  auto res = kvlp::testing::check_gradients([&] { return ad::sum(ad::mul(project_entities(agg, wt), project_entities(agg, wt))); }, {wt});
  CHECK(res.max_rel_error <= 1e-4);
}

TEST_CASE("kge artifact round trip") {
  TransEConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 5;
  KGEArtifact a{train_transe(ids("e", 6), ids("r", 2), chain_graph(), cfg), GraphAttentionParams::identity(6, 3)};
  TempDir tmp;
  save_kge(a, tmp.path());
  auto b = load_kge(tmp.path());
  CHECK(b.embeddings.entity_ids == a.embeddings.entity_ids);
  CHECK(b.embeddings.relation_ids == a.embeddings.relation_ids);
  CHECK((b.embeddings.entity_vecs - a.embeddings.entity_vecs).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((b.embeddings.relation_vecs - a.embeddings.relation_vecs).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(b.gat.transform == a.gat.transform);
  CHECK(b.gat.attention_vec == a.gat.attention_vec);
  CHECK(std::filesystem::file_size(tmp / "kge.bin") == (6 + 2) * 6 * 4);
}
