#pragma once

#include "kvlp/eval/retrieval.hpp"
#include "kvlp/train/settings.hpp"

#include <array>
#include <filesystem>

namespace kvlp::eval {

struct AblationRow {
  int id = 0;
  model::KnowledgeToggles knowledge;
  RetrievalReports zero_shot;
  double final_mlm = 0;
};

struct AblationGrid {
  std::vector<AblationRow> rows;  // ID 1 (no designs) .. ID 8 (all designs)

  // Zero-shot T2I R@1 of ID 8 against ID 1.
  bool full_not_below_baseline() const;
};

// Toggle layout of the eight rows: none; AK; RK; LK; AK+RK; AK+LK; RK+LK; all.
std::array<model::KnowledgeToggles, 8> ablation_layout();

// Pre-trains every row with the same seed and budget under <out>/id<N> and
// scores zero-shot retrieval on the test split.
AblationGrid run_ablation(const train::Settings& base, const std::filesystem::path& out);

// ablation.json and ablation.csv.
void write_ablation(const AblationGrid& g, const std::filesystem::path& out);

// Reports as JSON and CSV (one line per direction).
void write_reports(const std::vector<RetrievalReport>& reports, const std::filesystem::path& json_path,
                   const std::filesystem::path& csv_path);

}  // namespace kvlp::eval
