#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phonseg/segmentation.hpp"

namespace phonseg {

// Phoneme symbol inventory, one symbol per line in the sidecar file.
// Symbols may span several code points; tokenization is greedy longest-match.
// Without an inventory, sequences split into single Unicode scalar values.
struct PhonemeInventory {
  std::vector<std::string> symbols;

  static PhonemeInventory load(const std::string& path);
  bool contains(const std::string& symbol) const;

  // Splits one unspaced word into inventory symbols; throws on an
  // unmatchable suffix (message carries `where` for context).
  std::vector<std::string> split(std::string_view word, const std::string& where) const;
};

struct UtterancePair {
  std::string id;
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_phonemes;          // unsegmented
  std::optional<Segmentation> gold_boundaries;       // from field-3 spacing when present

  void validate() const;
};

struct ParallelCorpus {
  std::vector<UtterancePair> pairs;
  std::string source_language;
  std::string target_language;

  const UtterancePair* find(const std::string& id) const;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// TSV, one record per line: id \t source words \t target words (spaces in
// field 3 mark gold boundaries, phonemes joined inside a word).
ParallelCorpus load_corpus(const std::string& path, const std::string& source_lang,
                           const std::string& target_lang,
                           const PhonemeInventory* inventory = nullptr);

// Writes the corpus in the same TSV format with field 3 spaced at `segs`
// boundaries (one segmentation per pair, corpus order).
void write_segmented(const ParallelCorpus& corpus, const std::vector<Segmentation>& segs,
                     const std::string& path);

// Field-3 spacing from the stored gold boundaries.
void write_corpus(const ParallelCorpus& corpus, const std::string& path);

// Crosses two monolingual files sharing ids: source tokens from `source`,
// target phonemes (and gold) from `target`. Order follows `source`.
ParallelCorpus pair_corpus(const ParallelCorpus& source, const ParallelCorpus& target);

// Keeps pairs whose pivot sentence has at most max_tokens source tokens.
ParallelCorpus filter_by_length(const ParallelCorpus& corpus, const ParallelCorpus& pivot,
                                int max_tokens = 100);

// Deterministic split: ids hashed with the seed, lowest-hash round(f*N) ids
// become validation. Corpora sharing ids get the identical split.
std::pair<ParallelCorpus, ParallelCorpus> split_train_valid(const ParallelCorpus& corpus,
                                                            double valid_fraction,
                                                            std::uint64_t seed);

std::vector<std::string> insert_soft_boundaries(const std::vector<std::string>& phonemes,
                                                const Segmentation& seg,
                                                const std::string& marker);

// Re-bases a hypothesized segmentation over marker-augmented symbols onto the
// unaugmented sequence: markers vanish, a boundary at a marker maps to the
// boundary between its flanking phonemes, duplicates collapse.
Segmentation remove_soft_boundaries(const std::vector<std::vector<std::string>>& spans,
                                    const std::string& marker);

struct SideStats {
  std::size_t types = 0;
  std::size_t tokens = 0;
  double mean_token_length = 0.0;       // code points (source) / phonemes (target) per token
  double mean_tokens_per_sentence = 0.0;
  double mean_units_per_sentence = 0.0;  // atomic units: code points / phonemes
};

enum class Side { source, target };

SideStats corpus_stats(const ParallelCorpus& corpus, Side side);

}  // namespace phonseg
