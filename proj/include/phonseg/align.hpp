#pragma once

#include <Eigen/Core>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phonseg/segmentation.hpp"
#include "phonseg/soft_alignment.hpp"

namespace phonseg {

struct AlignedSegmentation {
  Segmentation segmentation;
  std::vector<int> span_sources;            // one source index per word span
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_symbols;  // unaugmented target

  std::vector<std::string> span_strings() const;  // phonemes of each span joined
};

// Boundary wherever the argmax of adjacent attention rows changes; each span
// aligns to its rows' shared argmax. Ties break toward the lowest source
// index. Columns with mask[i] == false are excluded from the competition.
AlignedSegmentation attention_segment(const SoftAlignmentMatrix& matrix,
                                      const std::vector<bool>* column_mask = nullptr);

// attention_segment over a marker-augmented target, then marker removal and
// boundary re-basing; span alignments recomputed over the surviving spans.
AlignedSegmentation hybrid_segment(const SoftAlignmentMatrix& matrix, const std::string& marker,
                                   const std::vector<bool>* column_mask = nullptr);

// Boundary after source word k at round(T * cumlen_k / total_len), half-up;
// edge and duplicate positions dropped.
Segmentation proportional_segment(const std::vector<int>& source_word_lengths, int target_len);

// (1/T) sum_t H(row_t) / ln(A); 0 when A == 1. In [0, 1].
double average_normalized_entropy(const Eigen::Ref<const Eigen::MatrixXd>& weights);

struct ConfidenceEntry {
  std::string target_span;
  std::string source_token;
  double ane = 0.0;   // min over the sentences the pair occurred in
  long frequency = 0;
};

// (span, source token) pairs sorted ascending by their sentence's average
// normalized entropy; duplicates aggregate to min-ANE with a frequency.
std::vector<ConfidenceEntry> rank_alignments(
    const std::vector<AlignedSegmentation>& segmentations,
    const std::vector<SoftAlignmentMatrix>& matrices);

struct TopkIntersection {
  double percentage = 0.0;
  int effective_k = 0;    // min(k, correct types available in each ranking)
  bool truncated = false; // fewer than k correct types were available
};

// Restricts both rankings to types present in the gold lexicon, truncates to
// k distinct types each, returns the overlap percentage.
TopkIntersection topk_type_intersection(const std::vector<ConfidenceEntry>& ranking_a,
                                        const std::vector<ConfidenceEntry>& ranking_b,
                                        const std::set<std::string>& gold_types, int k = 200);

void write_ranking(const std::vector<ConfidenceEntry>& ranking, const std::string& path);

}  // namespace phonseg
