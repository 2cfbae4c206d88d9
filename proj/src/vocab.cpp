#include "phonseg/vocab.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace phonseg {

namespace {
const char* kReserved[] = {"<pad>", "<s>", "</s>", "<unk>"};
}

int Vocab::id(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& sequences, int min_count) {
  if (sequences.empty()) throw std::invalid_argument("build_vocab: empty corpus side");
  std::map<std::string, long> freq;  // ordered: lexicographic tiebreak for free
  for (const auto& seq : sequences)
    for (const auto& tok : seq) ++freq[tok];

  Vocab v;
  for (const char* r : kReserved) {
    if (freq.count(r))
      throw std::invalid_argument(std::string("corpus token collides with reserved token ") + r);
    v.index.emplace(r, static_cast<int>(v.tokens.size()));
    v.tokens.push_back(r);
  }

  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : items) {
    if (n < min_count) continue;
    v.index.emplace(tok, static_cast<int>(v.tokens.size()));
    v.tokens.push_back(tok);
  }
  return v;
}

std::vector<int> encode(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

}  // namespace phonseg
