#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace kvlp::kb {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split parse_split(const std::string& s);

// One line of corpus.jsonl. `image` is relative to the corpus directory.
struct CorpusRecord {
  std::string id;
  std::string image;
  std::string text;
  Split split = Split::kTrain;

  bool operator==(const CorpusRecord&) const = default;
};

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::vector<CorpusRecord>& records, const std::filesystem::path& path);

}  // namespace kvlp::kb
