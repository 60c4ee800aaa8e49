#pragma once

#include "kvlp/kb/knowledge_base.hpp"
#include "kvlp/kge/kge_io.hpp"
#include "kvlp/train/settings.hpp"

#include <filesystem>

namespace kvlp::train {

// Synthetic corpus (images, corpus.jsonl, full KB under kb/, manifest.json).
void generate_corpus(const Settings& s, const std::filesystem::path& out);

// Links every corpus text against <corpus_dir>/kb and writes the sub-KB of
// the mentioned entities to `out`.
kb::KnowledgeBase extract_kb(const Settings& s, const std::filesystem::path& out);

// TransE over the restricted KB at kb_dir plus fixed graph attention
// parameters; written to `out` as kge.bin / kge.json.
kge::KGEArtifact train_kge(const Settings& s, const std::filesystem::path& out);

}  // namespace kvlp::train
