#include "phonseg/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace phonseg {

BayesHyperparams BayesHyperparams::with_uniform_base(const std::vector<std::string>& inventory,
                                                     double alpha0, double p_hash) {
  if (inventory.empty()) throw std::invalid_argument("empty phoneme inventory");
  BayesHyperparams hp;
  hp.alpha0 = alpha0;
  hp.p_hash = p_hash;
  double u = 1.0 / static_cast<double>(inventory.size());
  for (const auto& s : inventory) hp.phoneme_base[s] = u;
  if (hp.phoneme_base.size() != inventory.size())
    throw std::invalid_argument("duplicate symbols in inventory");
  hp.validate();
  return hp;
}

void BayesHyperparams::validate() const {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be > 0");
  if (!(p_hash > 0.0 && p_hash < 1.0)) throw std::invalid_argument("p_hash must be in (0,1)");
  double sum = 0.0;
  for (const auto& [sym, p] : phoneme_base) {
    if (p < 0.0) throw std::invalid_argument("negative base probability for '" + sym + "'");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("phoneme base distribution sums to " + std::to_string(sum));
}

double base_prob(const std::vector<std::string>& word, const BayesHyperparams& hp) {
  if (word.empty()) throw std::invalid_argument("base_prob: empty word");
  double p = hp.p_hash;
  for (std::size_t j = 0; j < word.size(); ++j) {
    auto it = hp.phoneme_base.find(word[j]);
    if (it == hp.phoneme_base.end())
      throw std::invalid_argument("base_prob: unknown symbol '" + word[j] + "'");
    p *= it->second;
    if (j + 1 < word.size()) p *= 1.0 - hp.p_hash;
  }
  return p;
}

void LexiconState::add(const std::vector<std::string>& word, long k) {
  counts[word] += k;
  total += k;
}

void LexiconState::remove(const std::vector<std::string>& word, long k) {
  auto it = counts.find(word);
  if (it == counts.end() || it->second < k)
    throw std::invalid_argument("LexiconState::remove: count underflow");
  it->second -= k;
  total -= k;
  if (it->second == 0) counts.erase(it);
}

long LexiconState::count(const std::vector<std::string>& word) const {
  auto it = counts.find(word);
  return it == counts.end() ? 0 : it->second;
}

double crp_word_prob(const std::vector<std::string>& word, const LexiconState& state,
                     const BayesHyperparams& hp) {
  double p0 = base_prob(word, hp);
  return (static_cast<double>(state.count(word)) + hp.alpha0 * p0) /
         (static_cast<double>(state.total) + hp.alpha0);
}

GibbsConfig GibbsConfig::defaults(int total_sweeps, std::uint64_t seed) {
  GibbsConfig cfg;
  cfg.seed = seed;
  const double temps[] = {2.0, 1.5, 1.2, 1.0};
  const double fracs[] = {0.1, 0.2, 0.2, 0.5};
  int assigned = 0;
  for (int i = 0; i < 4; ++i) {
    int n = i == 3 ? total_sweeps - assigned
                   : static_cast<int>(std::floor(fracs[i] * total_sweeps + 0.5));
    n = std::max(n, i == 3 ? 1 : 0);
    cfg.annealing.emplace_back(temps[i], n);
    assigned += n;
  }
  cfg.validate();
  return cfg;
}

int GibbsConfig::total_sweeps() const {
  int n = 0;
  for (const auto& [t, k] : annealing) n += k;
  return n;
}

void GibbsConfig::validate() const {
  if (total_sweeps() < 1) throw std::invalid_argument("GibbsConfig: need at least one sweep");
  for (const auto& [t, k] : annealing) {
    if (!(t > 0.0)) throw std::invalid_argument("GibbsConfig: temperatures must be > 0");
    if (k < 0) throw std::invalid_argument("GibbsConfig: negative sweep count");
  }
  if (!(init_boundary_prob >= 0.0 && init_boundary_prob <= 1.0))
    throw std::invalid_argument("GibbsConfig: init_boundary_prob outside [0,1]");
}

GibbsSampler::GibbsSampler(const std::vector<std::vector<std::string>>& utterances,
                           BayesHyperparams hp, std::uint64_t seed)
    : rng_(seed) {
  hp.validate();
  alpha0_ = hp.alpha0;
  p_hash_ = hp.p_hash;
  log_p_hash_ = std::log(p_hash_);
  log_1m_p_hash_ = std::log(1.0 - p_hash_);
  std::set<std::string> seen;
  for (const auto& u : utterances)
    for (const auto& s : u) seen.insert(s);
  if (seen.size() > 255)
    throw std::invalid_argument("GibbsSampler: more than 255 distinct phoneme symbols");
  for (const auto& s : seen) {
    auto it = hp.phoneme_base.find(s);
    if (it == hp.phoneme_base.end())
      throw std::invalid_argument("GibbsSampler: symbol '" + s + "' missing from base");
    symbol_to_id_.emplace(s, static_cast<int>(id_to_symbol_.size()));
    id_to_symbol_.push_back(s);
    log_base_by_id_.push_back(std::log(it->second));
  }
  for (const auto& u : utterances) {
    if (u.empty()) throw std::invalid_argument("GibbsSampler: empty utterance");
    std::string enc;
    std::vector<double> prefix{0.0};
    for (const auto& s : u) {
      int id = symbol_to_id_.at(s);
      enc.push_back(static_cast<char>(id));
      prefix.push_back(prefix.back() + log_base_by_id_[id]);
    }
    encoded_.push_back(std::move(enc));
    log_base_prefix_.push_back(std::move(prefix));
    std::vector<std::uint8_t> f(u.size() + 1, 0);
    f.front() = f.back() = 1;
    flags_.push_back(std::move(f));
  }
  rebuild_counts();
}

double GibbsSampler::span_log_base(std::size_t u, int begin, int end) const {
  return log_p_hash_ + (end - begin - 1) * log_1m_p_hash_ +
         (log_base_prefix_[u][end] - log_base_prefix_[u][begin]);
}

double GibbsSampler::log_crp(const std::string& word, double log_p0, long extra_same,
                             long extra_total) const {
  auto it = counts_.find(word);
  long n_w = (it == counts_.end() ? 0 : it->second) + extra_same;
  double log_num = std::log(alpha0_) + log_p0;
  if (n_w > 0) {
    double log_n = std::log(static_cast<double>(n_w));
    double m = std::max(log_n, log_num);
    log_num = m + std::log(std::exp(log_n - m) + std::exp(log_num - m));
  }
  return log_num - std::log(static_cast<double>(total_ + extra_total) + alpha0_);
}

void GibbsSampler::add_word(const std::string& w) {
  ++counts_[w];
  ++total_;
}

void GibbsSampler::remove_word(const std::string& w) {
  auto it = counts_.find(w);
  if (it == counts_.end() || it->second <= 0)
    throw std::logic_error("GibbsSampler: removing an absent word");
  --total_;
  if (--it->second == 0) counts_.erase(it);
}

void GibbsSampler::rebuild_counts() {
  counts_.clear();
  total_ = 0;
  for (std::size_t u = 0; u < encoded_.size(); ++u) {
    const auto& f = flags_[u];
    int start = 0;
    for (int i = 1; i < static_cast<int>(f.size()); ++i) {
      if (f[i]) {
        ++counts_[encoded_[u].substr(start, i - start)];
        ++total_;
        start = i;
      }
    }
  }
}

void GibbsSampler::init_boundaries(double p) {
  for (auto& f : flags_)
    for (std::size_t i = 1; i + 1 < f.size(); ++i) f[i] = rng_.uniform01() < p ? 1 : 0;
  rebuild_counts();
}

void GibbsSampler::set_boundaries(const std::vector<Segmentation>& segs) {
  if (segs.size() != flags_.size())
    throw std::invalid_argument("set_boundaries: segmentation count mismatch");
  for (std::size_t u = 0; u < segs.size(); ++u) {
    if (segs[u].length + 1 != static_cast<int>(flags_[u].size()))
      throw std::invalid_argument("set_boundaries: length mismatch");
    std::fill(flags_[u].begin() + 1, flags_[u].end() - 1, 0);
    for (int b : segs[u].boundaries) flags_[u][b] = 1;
  }
  rebuild_counts();
}

// One position: remove the affected words from the counts and return the
// annealed split probability. Counts are left WITHOUT those words; the caller
// must reinsert one configuration.
double GibbsSampler::eval_split(std::size_t u, int pos, double temperature, std::string& whole,
                                std::string& left, std::string& right, bool& had_boundary) {
  const auto& f = flags_[u];
  int p = pos - 1, q = pos + 1;
  while (!f[p]) --p;
  while (!f[q]) ++q;
  whole = encoded_[u].substr(p, q - p);
  left = encoded_[u].substr(p, pos - p);
  right = encoded_[u].substr(pos, q - pos);
  had_boundary = f[pos] != 0;
  if (had_boundary) {
    remove_word(left);
    remove_word(right);
  } else {
    remove_word(whole);
  }
  double lp_join = log_crp(whole, span_log_base(u, p, q), 0, 0);
  double lp_split = log_crp(left, span_log_base(u, p, pos), 0, 0) +
                    log_crp(right, span_log_base(u, pos, q), left == right ? 1 : 0, 1);
  double l1 = lp_join / temperature, l2 = lp_split / temperature;
  double m = std::max(l1, l2);
  double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
  return w2 / (w1 + w2);
}

double GibbsSampler::split_probability(std::size_t u, int position, double temperature) {
  if (u >= encoded_.size()) throw std::out_of_range("split_probability: utterance index");
  if (position <= 0 || position >= static_cast<int>(encoded_[u].size()))
    throw std::out_of_range("split_probability: position not interior");
  std::string whole, left, right;
  bool had;
  double p = eval_split(u, position, temperature, whole, left, right, had);
  if (had) {
    add_word(left);
    add_word(right);
  } else {
    add_word(whole);
  }
  return p;
}

void GibbsSampler::sweep(double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("sweep: temperature must be > 0");
#ifndef NDEBUG
  check_consistent();
#endif
  std::string whole, left, right;
  for (std::size_t u = 0; u < encoded_.size(); ++u) {
    const int t_len = static_cast<int>(encoded_[u].size());
    for (int pos = 1; pos < t_len; ++pos) {
      bool had;
      double p_split = eval_split(u, pos, temperature, whole, left, right, had);
      bool split = rng_.uniform01() < p_split;
      flags_[u][pos] = split ? 1 : 0;
      if (split) {
        add_word(left);
        add_word(right);
      } else {
        add_word(whole);
      }
    }
  }
}

std::vector<Segmentation> GibbsSampler::boundaries() const {
  std::vector<Segmentation> out;
  for (std::size_t u = 0; u < flags_.size(); ++u) {
    Segmentation seg;
    seg.length = static_cast<int>(encoded_[u].size());
    for (int i = 1; i < seg.length; ++i)
      if (flags_[u][i]) seg.boundaries.push_back(i);
    out.push_back(std::move(seg));
  }
  return out;
}

LexiconState GibbsSampler::lexicon() const {
  LexiconState st;
  for (const auto& [enc, n] : counts_) {
    std::vector<std::string> word;
    for (char c : enc) word.push_back(id_to_symbol_[static_cast<unsigned char>(c)]);
    st.counts[word] = n;
    st.total += n;
  }
  return st;
}

double GibbsSampler::joint_log_prob() const {
  double lp = 0.0;
  for (const auto& [enc, n] : counts_) {
    double log_p0 = log_p_hash_ + (static_cast<double>(enc.size()) - 1.0) * log_1m_p_hash_;
    for (char c : enc) log_p0 += log_base_by_id_[static_cast<unsigned char>(c)];
    double p0 = std::exp(log_p0);
    for (long k = 0; k < n; ++k) lp += std::log(static_cast<double>(k) + alpha0_ * p0);
  }
  lp -= std::lgamma(static_cast<double>(total_) + alpha0_) - std::lgamma(alpha0_);
  return lp;
}

void GibbsSampler::check_consistent() const {
  std::unordered_map<std::string, long> expect;
  long expect_total = 0;
  for (std::size_t u = 0; u < encoded_.size(); ++u) {
    const auto& f = flags_[u];
    int start = 0;
    for (int i = 1; i < static_cast<int>(f.size()); ++i) {
      if (f[i]) {
        ++expect[encoded_[u].substr(start, i - start)];
        ++expect_total;
        start = i;
      }
    }
  }
  if (expect != counts_ || expect_total != total_)
    throw std::logic_error("GibbsSampler: lexicon counts inconsistent with boundaries");
}

BayesResult segment_corpus(const std::vector<std::vector<std::string>>& utterances,
                           const BayesHyperparams& hp, const GibbsConfig& cfg) {
  if (utterances.empty()) throw std::invalid_argument("segment_corpus: empty corpus");
  cfg.validate();
  GibbsSampler sampler(utterances, hp, cfg.seed);
  sampler.init_boundaries(cfg.init_boundary_prob);
  BayesResult result;
  for (const auto& [temperature, sweeps] : cfg.annealing) {
    for (int s = 0; s < sweeps; ++s) sampler.sweep(temperature);
    result.log.push_back({temperature, sweeps, sampler.joint_log_prob()});
  }
  result.segmentations = sampler.boundaries();
  result.lexicon = sampler.lexicon();
  return result;
}

BayesResult segment_corpus(const ParallelCorpus& corpus, const BayesHyperparams& hp,
                           const GibbsConfig& cfg) {
  std::vector<std::vector<std::string>> utterances;
  for (const auto& p : corpus.pairs) utterances.push_back(p.target_phonemes);
  return segment_corpus(utterances, hp, cfg);
}

BayesHyperparams hyperparams_for_corpus(const ParallelCorpus& corpus, double alpha0,
                                        double p_hash) {
  std::set<std::string> inventory;
  for (const auto& p : corpus.pairs)
    for (const auto& s : p.target_phonemes) inventory.insert(s);
  return BayesHyperparams::with_uniform_base(
      std::vector<std::string>(inventory.begin(), inventory.end()), alpha0, p_hash);
}

}  // namespace phonseg
