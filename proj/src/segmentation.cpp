#include "phonseg/segmentation.hpp"

#include <stdexcept>
#include <string>

namespace phonseg {

void Segmentation::validate() const {
  if (length < 0) throw std::invalid_argument("segmentation: negative length");
  int prev = 0;
  for (int b : boundaries) {
    if (b <= 0 || b >= length)
      throw std::invalid_argument("segmentation: boundary " + std::to_string(b) +
                                  " outside (0, " + std::to_string(length) + ")");
    if (b <= prev) throw std::invalid_argument("segmentation: boundaries not strictly increasing");
    prev = b;
  }
}

std::vector<std::pair<int, int>> Segmentation::spans() const {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  for (int b : boundaries) {
    out.emplace_back(start, b);
    start = b;
  }
  if (length > 0) out.emplace_back(start, length);
  return out;
}

std::vector<std::vector<std::string>> apply_segmentation(const std::vector<std::string>& symbols,
                                                         const Segmentation& seg) {
  if (static_cast<int>(symbols.size()) != seg.length)
    throw std::invalid_argument("apply_segmentation: length mismatch");
  std::vector<std::vector<std::string>> words;
  for (auto [b, e] : seg.spans())
    words.emplace_back(symbols.begin() + b, symbols.begin() + e);
  return words;
}

Segmentation segmentation_from_words(const std::vector<std::vector<std::string>>& words) {
  Segmentation seg;
  int pos = 0;
  for (const auto& w : words) pos += static_cast<int>(w.size());
  seg.length = pos;
  pos = 0;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    pos += static_cast<int>(words[i].size());
    if (!seg.boundaries.empty() && seg.boundaries.back() == pos) continue;  // empty word
    if (pos > 0 && pos < seg.length) seg.boundaries.push_back(pos);
  }
  seg.validate();
  return seg;
}

}  // namespace phonseg
