#pragma once

#include "kvlp/autodiff/tensor.hpp"
#include "kvlp/kb/knowledge_base.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kvlp::kge {

using ad::Matrix;

struct KGEmbeddings {
  std::vector<std::string> entity_ids;    // row order of entity_vecs
  std::vector<std::string> relation_ids;  // row order of relation_vecs
  Matrix entity_vecs;                     // N_e × D_e
  Matrix relation_vecs;                   // N_r × D_e

  int dim() const { return static_cast<int>(entity_vecs.cols()); }
  int entity_index(const std::string& id) const;  // -1 when absent
  int relation_index(const std::string& id) const;
};

struct TransEConfig {
  int dim = 32;
  double margin = 1.0;
  double lr = 0.01;
  int epochs = 200;
  int neg_per_pos = 1;
  std::uint64_t seed = 1;
};

// Triple with row indices into KGEmbeddings.
struct IndexedTriple {
  int head = 0;
  int relation = 0;
  int tail = 0;
  bool operator==(const IndexedTriple&) const = default;
};

// ||h + r - t||_2; lower is more plausible.
double transe_score(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                    const Eigen::Ref<const Eigen::RowVectorXd>& r,
                    const Eigen::Ref<const Eigen::RowVectorXd>& t);

std::vector<IndexedTriple> index_triples(const std::vector<kb::Triple>& triples,
                                         const std::vector<std::string>& entity_ids,
                                         const std::vector<std::string>& relation_ids);

// Margin ranking SGD with one corrupted head or tail (p = 0.5 each) per
// negative; entity rows are projected back into the unit ball after every
// epoch. `epoch_loss`, when given, receives the mean hinge loss per epoch.
KGEmbeddings train_transe(const std::vector<std::string>& entity_ids,
                          const std::vector<std::string>& relation_ids,
                          const std::vector<kb::Triple>& triples, const TransEConfig& cfg,
                          std::vector<double>* epoch_loss = nullptr);

// Trains over the whole (already restricted) knowledge base.
KGEmbeddings train_transe(const kb::KnowledgeBase& kb, const TransEConfig& cfg,
                          std::vector<double>* epoch_loss = nullptr);

// Fraction of triples whose true tail ranks first among all entities after
// removing the other known tails of (head, relation).
double filtered_tail_hits_at_1(const KGEmbeddings& emb, const std::vector<IndexedTriple>& triples);

}  // namespace kvlp::kge
