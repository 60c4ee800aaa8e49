#pragma once

#include "kvlp/autodiff/tensor.hpp"
#include "kvlp/kge/transe.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace kvlp::kge {

struct GraphAttentionParams {
  Matrix transform;       // D_e × D_e, applied as transform · e
  Matrix attention_vec;   // 1 × 2·D_e
  double leaky_slope = 0.2;

  // Identity transform with a seeded N(0, 1/D_e) attention vector.
  static GraphAttentionParams identity(int dim, std::uint64_t seed);
};

struct GatResult {
  Matrix aggregated;  // N_e × D_e
  // attention[i] lists (neighbour j, α_ij) in ascending j, self included.
  std::vector<std::vector<std::pair<int, double>>> attention;
};

// Undirected neighbourhoods from the triples, each with a self-loop.
std::vector<std::vector<int>> neighbourhoods(int num_entities, const std::vector<IndexedTriple>& triples);

GatResult gat_aggregate(const KGEmbeddings& emb, const std::vector<IndexedTriple>& triples,
                        const GraphAttentionParams& params);

// aggregated (N_e × D_e) · W_proj (D_e × D); differentiable in W_proj.
ad::Tensor project_entities(const ad::Tensor& aggregated, const ad::Tensor& w_proj);

}  // namespace kvlp::kge
