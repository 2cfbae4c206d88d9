#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phonseg/corpus.hpp"
#include "phonseg/rng.hpp"
#include "phonseg/segmentation.hpp"

namespace phonseg {

struct BayesHyperparams {
  double alpha0 = 20.0;                         // DP concentration
  double p_hash = 0.5;                          // word-end probability
  std::map<std::string, double> phoneme_base;   // base distribution, sums to 1

  static BayesHyperparams with_uniform_base(const std::vector<std::string>& inventory,
                                            double alpha0 = 20.0, double p_hash = 0.5);
  void validate() const;
};

// P0(w) = p# (1-p#)^{|w|-1} prod_j base(w_j)
double base_prob(const std::vector<std::string>& word, const BayesHyperparams& hp);

struct LexiconState {
  std::map<std::vector<std::string>, long> counts;  // no zero entries kept
  long total = 0;

  void add(const std::vector<std::string>& word, long k = 1);
  void remove(const std::vector<std::string>& word, long k = 1);
  long count(const std::vector<std::string>& word) const;
};

// DP predictive rule: (n_w + alpha0 P0(w)) / (n + alpha0)
double crp_word_prob(const std::vector<std::string>& word, const LexiconState& state,
                     const BayesHyperparams& hp);

struct GibbsConfig {
  std::vector<std::pair<double, int>> annealing;  // (temperature, sweep count) stages
  std::uint64_t seed = 1;
  double init_boundary_prob = 0.3;

  // temperatures 2.0 / 1.5 / 1.2 / 1.0 over 10 / 20 / 20 / 50 % of sweeps
  static GibbsConfig defaults(int total_sweeps = 2000, std::uint64_t seed = 1);
  int total_sweeps() const;
  void validate() const;
};

struct GibbsStageLog {
  double temperature = 0.0;
  int sweeps = 0;
  double joint_log_prob = 0.0;
};

// Boundary-wise Gibbs sampler over a batch of utterances. State and boundary
// configuration stay mutually consistent after every position update.
class GibbsSampler {
 public:
  GibbsSampler(const std::vector<std::vector<std::string>>& utterances, BayesHyperparams hp,
               std::uint64_t seed);

  // independent boundaries with probability p at each interior position
  void init_boundaries(double p);
  void set_boundaries(const std::vector<Segmentation>& segs);

  // one pass over every interior position of every utterance
  void sweep(double temperature);

  // P(split) at one position, after removing the affected words; the word
  // counts are restored before returning. Exposed so tests can pin the
  // sampler's arithmetic against base_prob / crp_word_prob composition.
  double split_probability(std::size_t utterance, int position, double temperature);

  std::vector<Segmentation> boundaries() const;
  LexiconState lexicon() const;
  double joint_log_prob() const;

  // throws if counts do not match the multiset of words induced by the
  // current boundaries (debug builds run this at every sweep entry)
  void check_consistent() const;

 private:
  double log_crp(const std::string& word, double log_p0, long extra_same,
                 long extra_total) const;
  double span_log_base(std::size_t u, int begin, int end) const;
  double eval_split(std::size_t u, int pos, double temperature, std::string& whole,
                    std::string& left, std::string& right, bool& had_boundary);
  void rebuild_counts();
  void add_word(const std::string& w);
  void remove_word(const std::string& w);

  std::vector<std::string> id_to_symbol_;
  std::map<std::string, int> symbol_to_id_;
  std::vector<double> log_base_by_id_;
  double alpha0_, p_hash_, log_p_hash_, log_1m_p_hash_;
  std::vector<std::string> encoded_;                 // one byte per phoneme
  std::vector<std::vector<double>> log_base_prefix_; // per utterance, size T+1
  std::vector<std::vector<std::uint8_t>> flags_;     // T+1 flags, edges fixed set
  std::unordered_map<std::string, long> counts_;
  long total_ = 0;
  Rng rng_;
};

struct BayesResult {
  std::vector<Segmentation> segmentations;
  LexiconState lexicon;
  std::vector<GibbsStageLog> log;
};

BayesResult segment_corpus(const std::vector<std::vector<std::string>>& utterances,
                           const BayesHyperparams& hp, const GibbsConfig& cfg);

// Target side of a parallel corpus.
BayesResult segment_corpus(const ParallelCorpus& corpus, const BayesHyperparams& hp,
                           const GibbsConfig& cfg);

// Uniform-base hyperparameters over the observed target inventory.
BayesHyperparams hyperparams_for_corpus(const ParallelCorpus& corpus, double alpha0 = 20.0,
                                        double p_hash = 0.5);

}  // namespace phonseg
