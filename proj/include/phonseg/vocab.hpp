#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace phonseg {

// Token table for one side of the corpus. Indices 0..3 are reserved.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  std::vector<std::string> tokens;              // index -> token
  std::unordered_map<std::string, int> index;   // token -> index

  int id(const std::string& token) const;       // kUnk when absent
  const std::string& token(int id) const { return tokens.at(id); }
  int size() const { return static_cast<int>(tokens.size()); }
};

// Tokens ordered by descending frequency, ties lexicographic; tokens seen
// fewer than min_count times are dropped (they encode as UNK).
Vocab build_vocab(const std::vector<std::vector<std::string>>& sequences, int min_count = 1);

std::vector<int> encode(const Vocab& vocab, const std::vector<std::string>& tokens);

}  // namespace phonseg
