#pragma once

// Deterministic synthetic corpora with known segmentations.

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "phonseg/corpus.hpp"
#include "phonseg/rng.hpp"
#include "phonseg/segmentation.hpp"

namespace phonseg::synth {

inline std::vector<std::string> phoneme_alphabet() {
  std::vector<std::string> out;
  for (char c = 'a'; c <= 't'; ++c) out.push_back(std::string(1, c));
  return out;
}

// `count` distinct phoneme strings with lengths cycling over [min_len, max_len].
inline std::vector<std::vector<std::string>> make_lexicon(int count, int min_len, int max_len,
                                                          Rng& rng) {
  const auto alphabet = phoneme_alphabet();
  std::set<std::vector<std::string>> seen;
  std::vector<std::vector<std::string>> lexicon;
  int k = 0;
  while (static_cast<int>(lexicon.size()) < count) {
    const int len = min_len + k % (max_len - min_len + 1);
    ++k;
    std::vector<std::string> word;
    for (int j = 0; j < len; ++j) word.push_back(alphabet[rng.uniform_int(alphabet.size())]);
    if (seen.insert(word).second) lexicon.push_back(std::move(word));
  }
  return lexicon;
}

// Parallel corpus with an invertible word lexicon: source word w<k> always
// maps to the k-th target phoneme string. Sentences of 3..10 words; gold
// boundaries at the word seams.
inline ParallelCorpus make_bilingual_corpus(int sentences, std::uint64_t seed,
                                            int lexicon_size = 50) {
  Rng rng(seed);
  const auto lexicon = make_lexicon(lexicon_size, 3, 8, rng);
  ParallelCorpus corpus;
  corpus.source_language = "src";
  corpus.target_language = "tgt";
  for (int s = 0; s < sentences; ++s) {
    UtterancePair pair;
    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", s);
    pair.id = id;
    const int n_words = 3 + static_cast<int>(rng.uniform_int(8));  // 3..10
    std::vector<int> boundaries;
    for (int w = 0; w < n_words; ++w) {
      const int k = static_cast<int>(rng.uniform_int(lexicon_size));
      char tok[16];
      std::snprintf(tok, sizeof(tok), "w%02d", k);
      pair.source_tokens.push_back(tok);
      for (const auto& ph : lexicon[k]) pair.target_phonemes.push_back(ph);
      if (w + 1 < n_words) boundaries.push_back(static_cast<int>(pair.target_phonemes.size()));
    }
    pair.gold_boundaries =
        Segmentation(std::move(boundaries), static_cast<int>(pair.target_phonemes.size()));
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

struct MonoCorpus {
  std::vector<std::vector<std::string>> utterances;  // unsegmented phonemes
  std::vector<Segmentation> gold;
};

// Utterances drawn from a Zipfian lexicon (frequency of rank r proportional
// to 1/r), words of 2..6 phonemes, 2..7 words per utterance.
inline MonoCorpus make_zipfian_corpus(int utterances, std::uint64_t seed, int lexicon_size = 100) {
  Rng rng(seed);
  const auto lexicon = make_lexicon(lexicon_size, 2, 6, rng);
  std::vector<double> cdf(lexicon_size);
  double z = 0.0;
  for (int r = 0; r < lexicon_size; ++r) {
    z += 1.0 / (1.0 + r);
    cdf[r] = z;
  }
  for (double& c : cdf) c /= z;
  auto draw = [&]() {
    const double u = rng.uniform01();
    return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  MonoCorpus corpus;
  for (int s = 0; s < utterances; ++s) {
    const int n_words = 2 + static_cast<int>(rng.uniform_int(6));  // 2..7
    std::vector<std::string> phonemes;
    std::vector<int> boundaries;
    for (int w = 0; w < n_words; ++w) {
      for (const auto& ph : lexicon[draw()]) phonemes.push_back(ph);
      if (w + 1 < n_words) boundaries.push_back(static_cast<int>(phonemes.size()));
    }
    corpus.gold.emplace_back(std::move(boundaries), static_cast<int>(phonemes.size()));
    corpus.utterances.push_back(std::move(phonemes));
  }
  return corpus;
}

// Source tokens and target phonemes are the same sequence; ideal attention
// is (near) diagonal.
inline ParallelCorpus make_copy_corpus(int sentences, std::uint64_t seed, int alphabet = 10) {
  Rng rng(seed);
  ParallelCorpus corpus;
  corpus.source_language = "src";
  corpus.target_language = "tgt";
  for (int s = 0; s < sentences; ++s) {
    UtterancePair pair;
    char id[16];
    std::snprintf(id, sizeof(id), "c%05d", s);
    pair.id = id;
    const int len = 4 + static_cast<int>(rng.uniform_int(5));  // 4..8
    for (int i = 0; i < len; ++i) {
      const std::string sym(1, static_cast<char>('a' + rng.uniform_int(alphabet)));
      pair.source_tokens.push_back(sym);
      pair.target_phonemes.push_back(sym);
    }
    pair.gold_boundaries = Segmentation({}, len);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace phonseg::synth
