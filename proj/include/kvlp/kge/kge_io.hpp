#pragma once

#include "kvlp/kge/gat.hpp"
#include "kvlp/kge/transe.hpp"

#include <filesystem>

namespace kvlp::kge {

struct KGEArtifact {
  KGEmbeddings embeddings;
  GraphAttentionParams gat;
};

// Writes <dir>/kge.bin (entity rows then relation rows, LE f32) and
// <dir>/kge.json (shapes, id order, graph attention parameters).
void save_kge(const KGEArtifact& artifact, const std::filesystem::path& dir);
KGEArtifact load_kge(const std::filesystem::path& dir);

}  // namespace kvlp::kge
