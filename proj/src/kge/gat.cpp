#include "kvlp/kge/gat.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kvlp::kge {

GraphAttentionParams GraphAttentionParams::identity(int dim, std::uint64_t seed) {
  GraphAttentionParams p;
  p.transform = Matrix::Identity(dim, dim);
  p.attention_vec.resize(1, 2 * dim);
  Rng rng = substream(seed, "gat-attention");
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index i = 0; i < p.attention_vec.size(); ++i) p.attention_vec(0, i) = sd * normal(rng);
  return p;
}

std::vector<std::vector<int>> neighbourhoods(int num_entities, const std::vector<IndexedTriple>& triples) {
  std::vector<std::set<int>> sets(static_cast<std::size_t>(num_entities));
  for (int i = 0; i < num_entities; ++i) sets[static_cast<std::size_t>(i)].insert(i);
  for (const auto& t : triples) {
    if (t.head < 0 || t.tail < 0 || t.head >= num_entities || t.tail >= num_entities) {
      throw std::out_of_range("neighbourhoods: triple endpoint out of range");
    }
    sets[static_cast<std::size_t>(t.head)].insert(t.tail);
    sets[static_cast<std::size_t>(t.tail)].insert(t.head);
  }
  std::vector<std::vector<int>> out;
  out.reserve(sets.size());
  for (auto& s : sets) out.emplace_back(s.begin(), s.end());
  return out;
}

GatResult gat_aggregate(const KGEmbeddings& emb, const std::vector<IndexedTriple>& triples,
                        const GraphAttentionParams& params) {
  const auto n = emb.entity_vecs.rows();
  const auto d = emb.entity_vecs.cols();
  if (params.transform.rows() != d || params.transform.cols() != d || params.attention_vec.size() != 2 * d) {
    throw ad::DimensionError("gat_aggregate: parameter shapes do not match D_e");
  }
  const Matrix z = emb.entity_vecs * params.transform.transpose();
  const Eigen::VectorXd a_self = params.attention_vec.leftCols(d).transpose();
  const Eigen::VectorXd a_nb = params.attention_vec.rightCols(d).transpose();
  const Eigen::VectorXd s_self = z * a_self;
  const Eigen::VectorXd s_nb = z * a_nb;

  GatResult out;
  out.aggregated = Matrix::Zero(n, d);
  const auto nbrs = neighbourhoods(static_cast<int>(n), triples);
  out.attention.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& nb = nbrs[static_cast<std::size_t>(i)];
    std::vector<double> logits(nb.size());
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double x = s_self(i) + s_nb(nb[k]);
      logits[k] = x >= 0 ? x : params.leaky_slope * x;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0;
    for (auto& l : logits) total += (l = std::exp(l - m));
    auto& row = out.attention[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double alpha = logits[k] / total;
      row.emplace_back(nb[k], alpha);
      out.aggregated.row(i) += alpha * z.row(nb[k]);
    }
  }
  return out;
}

ad::Tensor project_entities(const ad::Tensor& aggregated, const ad::Tensor& w_proj) {
  if (aggregated.cols() != w_proj.rows()) {
    throw ad::DimensionError("project_entities: aggregated width does not match W_proj rows");
  }
  return ad::matmul(aggregated, w_proj);
}

}  // namespace kvlp::kge
