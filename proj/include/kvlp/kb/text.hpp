#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kvlp::kb {

// Lowercases and splits on whitespace and ASCII punctuation; punctuation is dropped.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

// Closed word-level vocabulary. The first four ids are reserved.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kMask = 1;
  static constexpr int kStart = 2;
  static constexpr int kSep = 3;

  Vocabulary();

  // Specials followed by every distinct token of `texts`, sorted.
  static Vocabulary build(const std::vector<std::vector<std::string>>& texts);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace kvlp::kb
