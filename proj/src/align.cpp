#include "phonseg/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "phonseg/corpus.hpp"

namespace phonseg {

namespace {

// Row argmaxes, ties toward the lowest index; masked columns never win.
std::vector<int> row_argmaxes(const SoftAlignmentMatrix& matrix,
                              const std::vector<bool>* column_mask) {
  const int t_len = matrix.target_len();
  const int a_len = matrix.source_len();
  if (column_mask) {
    if (static_cast<int>(column_mask->size()) != a_len)
      throw std::invalid_argument("column mask size does not match source length");
    if (std::none_of(column_mask->begin(), column_mask->end(), [](bool b) { return b; }))
      throw std::invalid_argument("column mask excludes every source position");
  }
  std::vector<int> arg(t_len, -1);
  for (int t = 0; t < t_len; ++t) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < a_len; ++i) {
      if (column_mask && !(*column_mask)[i]) continue;
      if (matrix.weights(t, i) > best) {
        best = matrix.weights(t, i);
        arg[t] = i;
      }
    }
  }
  return arg;
}

}  // namespace

std::vector<std::string> AlignedSegmentation::span_strings() const {
  std::vector<std::string> out;
  out.reserve(segmentation.word_count());
  for (auto [b, e] : segmentation.spans()) {
    std::string s;
    for (int i = b; i < e; ++i) s += target_symbols[i];
    out.push_back(std::move(s));
  }
  return out;
}

AlignedSegmentation attention_segment(const SoftAlignmentMatrix& matrix,
                                      const std::vector<bool>* column_mask) {
  matrix.validate();
  const std::vector<int> arg = row_argmaxes(matrix, column_mask);
  const int t_len = matrix.target_len();

  AlignedSegmentation out;
  out.source_tokens = matrix.source_tokens;
  out.target_symbols = matrix.target_symbols;
  std::vector<int> boundaries;
  std::vector<int> sources;
  if (t_len > 0) sources.push_back(arg[0]);
  for (int t = 1; t < t_len; ++t) {
    if (arg[t] != arg[t - 1]) {
      boundaries.push_back(t);
      sources.push_back(arg[t]);
    }
  }
  out.segmentation = Segmentation(std::move(boundaries), t_len);
  out.span_sources = std::move(sources);
  return out;
}

AlignedSegmentation hybrid_segment(const SoftAlignmentMatrix& matrix, const std::string& marker,
                                   const std::vector<bool>* column_mask) {
  const AlignedSegmentation augmented = attention_segment(matrix, column_mask);
  const auto spans = apply_segmentation(matrix.target_symbols, augmented.segmentation);
  const Segmentation rebased = remove_soft_boundaries(spans, marker);

  AlignedSegmentation out;
  out.segmentation = rebased;
  out.source_tokens = matrix.source_tokens;
  for (const auto& sym : matrix.target_symbols)
    if (sym != marker) out.target_symbols.push_back(sym);

  // Augmented row index of each surviving phoneme; a span's alignment is the
  // argmax of its first phoneme's row (rows inside an attention span agree).
  std::vector<int> row_of_phoneme;
  for (int i = 0; i < static_cast<int>(matrix.target_symbols.size()); ++i)
    if (matrix.target_symbols[i] != marker) row_of_phoneme.push_back(i);
  const std::vector<int> arg = row_argmaxes(matrix, column_mask);
  if (!out.target_symbols.empty())
    for (auto [b, e] : rebased.spans()) out.span_sources.push_back(arg[row_of_phoneme[b]]);
  return out;
}

Segmentation proportional_segment(const std::vector<int>& source_word_lengths, int target_len) {
  if (source_word_lengths.empty())
    throw std::invalid_argument("proportional_segment: no source words");
  if (target_len < 1) throw std::invalid_argument("proportional_segment: target length < 1");
  long long total = 0;
  for (int len : source_word_lengths) {
    if (len < 1) throw std::invalid_argument("proportional_segment: word length < 1");
    total += len;
  }
  std::vector<int> boundaries;
  long long cum = 0;
  for (std::size_t k = 0; k + 1 < source_word_lengths.size(); ++k) {
    cum += source_word_lengths[k];
    // round(T*cum/total) half-up, in exact integer arithmetic
    const long long pos = (2LL * target_len * cum + total) / (2LL * total);
    if (pos <= 0 || pos >= target_len) continue;
    if (!boundaries.empty() && boundaries.back() == pos) continue;
    boundaries.push_back(static_cast<int>(pos));
  }
  return Segmentation(std::move(boundaries), target_len);
}

double average_normalized_entropy(const Eigen::Ref<const Eigen::MatrixXd>& weights) {
  const int t_len = static_cast<int>(weights.rows());
  const int a_len = static_cast<int>(weights.cols());
  if (t_len == 0 || a_len <= 1) return 0.0;
  const double log_a = std::log(static_cast<double>(a_len));
  double sum = 0.0;
  for (int t = 0; t < t_len; ++t) {
    double h = 0.0;
    for (int i = 0; i < a_len; ++i) {
      const double p = weights(t, i);
      if (p > 0.0) h -= p * std::log(p);
    }
    sum += h / log_a;
  }
  return std::clamp(sum / t_len, 0.0, 1.0);
}

std::vector<ConfidenceEntry> rank_alignments(
    const std::vector<AlignedSegmentation>& segmentations,
    const std::vector<SoftAlignmentMatrix>& matrices) {
  if (segmentations.size() != matrices.size())
    throw std::invalid_argument("rank_alignments: segmentation/matrix count mismatch");

  std::map<std::pair<std::string, std::string>, ConfidenceEntry> table;
  for (std::size_t s = 0; s < segmentations.size(); ++s) {
    const double ane = average_normalized_entropy(matrices[s].weights);
    const auto spans = segmentations[s].span_strings();
    for (std::size_t w = 0; w < spans.size(); ++w) {
      const int src = segmentations[s].span_sources[w];
      const std::string& token = segmentations[s].source_tokens[src];
      auto& entry = table[{spans[w], token}];
      if (entry.frequency == 0) {
        entry.target_span = spans[w];
        entry.source_token = token;
        entry.ane = ane;
      } else {
        entry.ane = std::min(entry.ane, ane);
      }
      ++entry.frequency;
    }
  }

  std::vector<ConfidenceEntry> out;
  out.reserve(table.size());
  for (auto& [key, entry] : table) out.push_back(std::move(entry));
  std::sort(out.begin(), out.end(), [](const ConfidenceEntry& a, const ConfidenceEntry& b) {
    if (a.ane != b.ane) return a.ane < b.ane;
    if (a.target_span != b.target_span) return a.target_span < b.target_span;
    return a.source_token < b.source_token;
  });
  return out;
}

TopkIntersection topk_type_intersection(const std::vector<ConfidenceEntry>& ranking_a,
                                        const std::vector<ConfidenceEntry>& ranking_b,
                                        const std::set<std::string>& gold_types, int k) {
  if (k < 1) throw std::invalid_argument("topk_type_intersection: k < 1");
  auto correct_types = [&](const std::vector<ConfidenceEntry>& ranking) {
    std::vector<std::string> types;
    std::set<std::string> seen;
    for (const auto& e : ranking) {
      if (!gold_types.count(e.target_span) || !seen.insert(e.target_span).second) continue;
      types.push_back(e.target_span);
    }
    return types;
  };
  std::vector<std::string> a = correct_types(ranking_a);
  std::vector<std::string> b = correct_types(ranking_b);

  TopkIntersection result;
  result.effective_k = static_cast<int>(std::min<std::size_t>(
      {static_cast<std::size_t>(k), a.size(), b.size()}));
  result.truncated = result.effective_k < k;
  if (result.effective_k == 0) return result;
  a.resize(result.effective_k);
  b.resize(result.effective_k);
  std::set<std::string> set_a(a.begin(), a.end());
  int common = 0;
  for (const auto& t : b) common += set_a.count(t) ? 1 : 0;
  result.percentage = 100.0 * common / result.effective_k;
  return result;
}

void write_ranking(const std::vector<ConfidenceEntry>& ranking, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write ranking file: " + path);
  for (const auto& e : ranking)
    std::fprintf(f, "%.17g\t%ld\t%s\t%s\n", e.ane, e.frequency, e.target_span.c_str(),
                 e.source_token.c_str());
  std::fclose(f);
}

}  // namespace phonseg
