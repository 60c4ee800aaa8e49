#include "kvlp/kge/transe.hpp"

#include "kvlp/util/rng.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace kvlp::kge {

namespace {

int find_index(const std::vector<std::string>& ids, const std::string& id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return static_cast<int>(i);
  }
  return -1;
}

void renormalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 1.0) m.row(i) /= n;
  }
}

}  // namespace

int KGEmbeddings::entity_index(const std::string& id) const { return find_index(entity_ids, id); }
int KGEmbeddings::relation_index(const std::string& id) const { return find_index(relation_ids, id); }

double transe_score(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                    const Eigen::Ref<const Eigen::RowVectorXd>& r,
                    const Eigen::Ref<const Eigen::RowVectorXd>& t) {
  if (h.size() != r.size() || r.size() != t.size()) {
    throw ad::DimensionError("transe_score: vectors of different widths");
  }
  return (h + r - t).norm();
}

std::vector<IndexedTriple> index_triples(const std::vector<kb::Triple>& triples,
                                         const std::vector<std::string>& entity_ids,
                                         const std::vector<std::string>& relation_ids) {
  std::unordered_map<std::string, int> ent, rel;
  for (std::size_t i = 0; i < entity_ids.size(); ++i) ent[entity_ids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < relation_ids.size(); ++i) rel[relation_ids[i]] = static_cast<int>(i);
  std::vector<IndexedTriple> out;
  for (const auto& t : triples) {
    auto h = ent.find(t.head), tl = ent.find(t.tail);
    auto r = rel.find(t.relation);
    if (h == ent.end() || tl == ent.end() || r == rel.end()) {
      throw std::invalid_argument("triple (" + t.head + ", " + t.relation + ", " + t.tail +
                                  ") is not indexable");
    }
    out.push_back({h->second, r->second, tl->second});
  }
  return out;
}

KGEmbeddings train_transe(const std::vector<std::string>& entity_ids,
                          const std::vector<std::string>& relation_ids,
                          const std::vector<kb::Triple>& triples, const TransEConfig& cfg,
                          std::vector<double>* epoch_loss) {
  if (triples.empty()) throw std::invalid_argument("train_transe: empty triple set");
  if (cfg.dim <= 0 || cfg.neg_per_pos < 1) throw std::invalid_argument("train_transe: bad config");
  const auto indexed = index_triples(triples, entity_ids, relation_ids);

  KGEmbeddings emb;
  emb.entity_ids = entity_ids;
  emb.relation_ids = relation_ids;
  const auto ne = static_cast<Eigen::Index>(entity_ids.size());
  const auto nr = static_cast<Eigen::Index>(relation_ids.size());
  Rng init = substream(cfg.seed, "transe-init");
  const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
  auto fill = [&](Matrix& m, Eigen::Index rows) {
    m.resize(rows, cfg.dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = bound * (2 * uniform_real(init) - 1);
    for (Eigen::Index i = 0; i < rows; ++i) m.row(i).normalize();
  };
  fill(emb.entity_vecs, ne);
  fill(emb.relation_vecs, nr);

  Matrix& E = emb.entity_vecs;
  Matrix& R = emb.relation_vecs;
  Rng rng = substream(cfg.seed, "transe-train");
  std::vector<std::size_t> order(indexed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0;
    for (std::size_t idx : order) {
      const auto& tr = indexed[idx];
      for (int k = 0; k < cfg.neg_per_pos; ++k) {
        int nh = tr.head, nt = tr.tail;
        const bool corrupt_head = uniform_real(rng) < 0.5;
        if (ne > 1) {
          int& slot = corrupt_head ? nh : nt;
          const int original = slot;
          do {
            slot = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ne)));
          } while (slot == original);
        }
        const Eigen::RowVectorXd pos = E.row(tr.head) + R.row(tr.relation) - E.row(tr.tail);
        const Eigen::RowVectorXd neg = E.row(nh) + R.row(tr.relation) - E.row(nt);
        const double ps = pos.norm(), ns = neg.norm();
        const double loss = cfg.margin + ps - ns;
        if (loss <= 0) continue;
        total += loss;
        const Eigen::RowVectorXd gp = ps > 0 ? Eigen::RowVectorXd(pos / ps) : Eigen::RowVectorXd::Zero(pos.size());
        const Eigen::RowVectorXd gn = ns > 0 ? Eigen::RowVectorXd(neg / ns) : Eigen::RowVectorXd::Zero(neg.size());
        E.row(tr.head) -= cfg.lr * gp;
        E.row(tr.tail) += cfg.lr * gp;
        R.row(tr.relation) -= cfg.lr * (gp - gn);
        E.row(nh) += cfg.lr * gn;
        E.row(nt) -= cfg.lr * gn;
      }
    }
    renormalize_rows(E);
    if (epoch_loss) {
      epoch_loss->push_back(total / static_cast<double>(indexed.size() * static_cast<std::size_t>(cfg.neg_per_pos)));
    }
  }
  return emb;
}

KGEmbeddings train_transe(const kb::KnowledgeBase& kb, const TransEConfig& cfg,
                          std::vector<double>* epoch_loss) {
  std::vector<std::string> ents, rels;
  for (const auto& e : kb.entities()) ents.push_back(e.id);
  for (const auto& r : kb.relations()) rels.push_back(r.id);
  return train_transe(ents, rels, kb.triples(), cfg, epoch_loss);
}

double filtered_tail_hits_at_1(const KGEmbeddings& emb, const std::vector<IndexedTriple>& triples) {
  if (triples.empty()) return 0.0;
  std::set<std::tuple<int, int, int>> known;
  for (const auto& t : triples) known.emplace(t.head, t.relation, t.tail);
  int hits = 0;
  for (const auto& t : triples) {
    const double truth = transe_score(emb.entity_vecs.row(t.head), emb.relation_vecs.row(t.relation),
                                      emb.entity_vecs.row(t.tail));
    bool best = true;
    for (Eigen::Index c = 0; c < emb.entity_vecs.rows() && best; ++c) {
      if (c == t.tail || known.count({t.head, t.relation, static_cast<int>(c)})) continue;
      const double s = transe_score(emb.entity_vecs.row(t.head), emb.relation_vecs.row(t.relation),
                                    emb.entity_vecs.row(c));
      if (s <= truth) best = false;
    }
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(triples.size());
}

}  // namespace kvlp::kge
