#pragma once

#include <string>
#include <utility>
#include <vector>

namespace phonseg {

// Word boundaries over a phoneme sequence of `length` symbols. A boundary b
// means "split after the b-th symbol"; utterance edges (0 and length) are
// implicit and never stored.
struct Segmentation {
  std::vector<int> boundaries;  // strictly increasing, each in (0, length)
  int length = 0;

  Segmentation() = default;
  Segmentation(std::vector<int> b, int len) : boundaries(std::move(b)), length(len) { validate(); }

  // throws std::invalid_argument on out-of-range / unsorted / duplicate boundaries
  void validate() const;

  // half-open [begin, end) spans tiling [0, length)
  std::vector<std::pair<int, int>> spans() const;

  std::size_t word_count() const { return boundaries.size() + 1; }

  bool operator==(const Segmentation& o) const = default;
};

// Groups `symbols` into the words induced by `seg`.
std::vector<std::vector<std::string>> apply_segmentation(const std::vector<std::string>& symbols,
                                                         const Segmentation& seg);

// Boundary positions of a sequence given as word groups; inverse of apply_segmentation.
Segmentation segmentation_from_words(const std::vector<std::vector<std::string>>& words);

}  // namespace phonseg
