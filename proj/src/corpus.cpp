#include "phonseg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "phonseg/text.hpp"

namespace phonseg {

PhonemeInventory PhonemeInventory::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open inventory file: " + path);
  PhonemeInventory inv;
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen.insert(line).second)
      throw std::runtime_error("duplicate inventory symbol '" + line + "' in " + path);
    inv.symbols.push_back(line);
  }
  return inv;
}

bool PhonemeInventory::contains(const std::string& symbol) const {
  return std::find(symbols.begin(), symbols.end(), symbol) != symbols.end();
}

std::vector<std::string> PhonemeInventory::split(std::string_view word,
                                                 const std::string& where) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t best = 0;
    for (const auto& sym : symbols)
      if (sym.size() > best && word.compare(i, sym.size(), sym) == 0) best = sym.size();
    if (best == 0)
      throw std::runtime_error("no inventory symbol matches '" + std::string(word.substr(i)) +
                               "' (" + where + ")");
    out.emplace_back(word.substr(i, best));
    i += best;
  }
  return out;
}

void UtterancePair::validate() const {
  if (source_tokens.empty()) throw std::invalid_argument("pair " + id + ": empty source");
  if (target_phonemes.empty()) throw std::invalid_argument("pair " + id + ": empty target");
  if (gold_boundaries) {
    if (gold_boundaries->length != static_cast<int>(target_phonemes.size()))
      throw std::invalid_argument("pair " + id + ": gold segmentation length mismatch");
    gold_boundaries->validate();
  }
}

const UtterancePair* ParallelCorpus::find(const std::string& id) const {
  for (const auto& p : pairs)
    if (p.id == id) return &p;
  return nullptr;
}

ParallelCorpus load_corpus(const std::string& path, const std::string& source_lang,
                           const std::string& target_lang, const PhonemeInventory* inventory) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  ParallelCorpus corpus;
  corpus.source_language = source_lang;
  corpus.target_language = target_lang;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                               std::to_string(fields.size()));
    UtterancePair pair;
    pair.id = fields[0];
    if (!ids.insert(pair.id).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate id '" +
                               pair.id + "'");
    pair.source_tokens = split_whitespace(fields[1]);
    const std::string where = path + ":" + std::to_string(line_no);
    std::vector<std::vector<std::string>> words;
    for (const auto& w : split_whitespace(fields[2]))
      words.push_back(inventory ? inventory->split(w, where) : utf8_split(w));
    for (const auto& w : words)
      pair.target_phonemes.insert(pair.target_phonemes.end(), w.begin(), w.end());
    if (pair.source_tokens.empty() || pair.target_phonemes.empty())
      throw std::runtime_error(where + ": empty source or target field");
    pair.gold_boundaries = segmentation_from_words(words);
    pair.validate();
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

namespace {

std::string spaced_target(const UtterancePair& pair, const Segmentation& seg) {
  std::vector<std::string> words;
  for (const auto& w : apply_segmentation(pair.target_phonemes, seg)) words.push_back(join(w, ""));
  return join(words, " ");
}

}  // namespace

void write_segmented(const ParallelCorpus& corpus, const std::vector<Segmentation>& segs,
                     const std::string& path) {
  if (segs.size() != corpus.pairs.size())
    throw std::invalid_argument("write_segmented: segmentation count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& p = corpus.pairs[i];
    out << p.id << '\t' << join(p.source_tokens, " ") << '\t' << spaced_target(p, segs[i])
        << '\n';
  }
}

void write_corpus(const ParallelCorpus& corpus, const std::string& path) {
  std::vector<Segmentation> segs;
  for (const auto& p : corpus.pairs) {
    if (!p.gold_boundaries)
      throw std::invalid_argument("write_corpus: pair " + p.id + " has no boundaries");
    segs.push_back(*p.gold_boundaries);
  }
  write_segmented(corpus, segs, path);
}

ParallelCorpus pair_corpus(const ParallelCorpus& source, const ParallelCorpus& target) {
  std::unordered_map<std::string, const UtterancePair*> by_id;
  for (const auto& p : target.pairs) by_id.emplace(p.id, &p);
  ParallelCorpus out;
  out.source_language = source.source_language;
  out.target_language = target.target_language;
  std::vector<std::string> missing;
  for (const auto& src : source.pairs) {
    auto it = by_id.find(src.id);
    if (it == by_id.end()) {
      missing.push_back(src.id);
      continue;
    }
    UtterancePair p;
    p.id = src.id;
    p.source_tokens = src.source_tokens;
    p.target_phonemes = it->second->target_phonemes;
    p.gold_boundaries = it->second->gold_boundaries;
    out.pairs.push_back(std::move(p));
  }
  if (!missing.empty())
    throw std::runtime_error("pair_corpus: ids missing from target corpus: " +
                             join(missing, ", "));
  if (source.pairs.size() != target.pairs.size())
    throw std::runtime_error("pair_corpus: corpora do not share the same id set");
  return out;
}

ParallelCorpus filter_by_length(const ParallelCorpus& corpus, const ParallelCorpus& pivot,
                                int max_tokens) {
  std::unordered_map<std::string, std::size_t> pivot_len;
  for (const auto& p : pivot.pairs) pivot_len.emplace(p.id, p.source_tokens.size());
  std::vector<std::string> missing;
  ParallelCorpus out;
  out.source_language = corpus.source_language;
  out.target_language = corpus.target_language;
  for (const auto& p : corpus.pairs) {
    auto it = pivot_len.find(p.id);
    if (it == pivot_len.end()) {
      missing.push_back(p.id);
      continue;
    }
    if (static_cast<int>(it->second) <= max_tokens) out.pairs.push_back(p);
  }
  if (!missing.empty())
    throw std::runtime_error("filter_by_length: ids missing from pivot: " + join(missing, ", "));
  return out;
}

std::pair<ParallelCorpus, ParallelCorpus> split_train_valid(const ParallelCorpus& corpus,
                                                            double valid_fraction,
                                                            std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
    throw std::invalid_argument("split_train_valid: fraction must be in (0,1)");
  if (corpus.pairs.size() < 2)
    throw std::invalid_argument("split_train_valid: corpus has fewer than 2 pairs");
  std::vector<std::string> ids;
  for (const auto& p : corpus.pairs) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  // The raw hash diffuses trailing bytes weakly, which leaves same-length
  // structured ids nearly co-ordered across seeds; the finalizer rounds give
  // every (id, seed) combination an independent rank.
  auto rank = [seed](const std::string& s) {
    std::uint64_t h = fnv1a64(s, seed);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return h;
  };
  std::stable_sort(ids.begin(), ids.end(), [&rank](const std::string& a, const std::string& b) {
    return rank(a) < rank(b);
  });
  std::size_t n_valid =
      static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(ids.size()) + 0.5));
  std::unordered_set<std::string> valid_ids(ids.begin(), ids.begin() + n_valid);
  ParallelCorpus train, valid;
  train.source_language = valid.source_language = corpus.source_language;
  train.target_language = valid.target_language = corpus.target_language;
  for (const auto& p : corpus.pairs)
    (valid_ids.count(p.id) ? valid : train).pairs.push_back(p);
  return {std::move(train), std::move(valid)};
}

std::vector<std::string> insert_soft_boundaries(const std::vector<std::string>& phonemes,
                                                const Segmentation& seg,
                                                const std::string& marker) {
  if (seg.length != static_cast<int>(phonemes.size()))
    throw std::invalid_argument("insert_soft_boundaries: length mismatch");
  if (std::find(phonemes.begin(), phonemes.end(), marker) != phonemes.end())
    throw std::invalid_argument("insert_soft_boundaries: marker '" + marker +
                                "' collides with the phoneme inventory");
  std::vector<std::string> out;
  out.reserve(phonemes.size() + seg.boundaries.size());
  std::size_t next = 0;
  for (int i = 0; i < seg.length; ++i) {
    if (next < seg.boundaries.size() && seg.boundaries[next] == i) {
      out.push_back(marker);
      ++next;
    }
    out.push_back(phonemes[i]);
  }
  return out;
}

Segmentation remove_soft_boundaries(const std::vector<std::vector<std::string>>& spans,
                                    const std::string& marker) {
  Segmentation seg;
  int real = 0;  // phonemes seen so far
  std::vector<int> raw;
  for (const auto& span : spans) {
    for (const auto& sym : span)
      if (sym != marker) ++real;
    raw.push_back(real);
  }
  seg.length = real;
  if (!raw.empty()) raw.pop_back();  // final span end is the sequence edge
  for (int b : raw) {
    if (b <= 0 || b >= seg.length) continue;
    if (!seg.boundaries.empty() && seg.boundaries.back() == b) continue;
    seg.boundaries.push_back(b);
  }
  seg.validate();
  return seg;
}

SideStats corpus_stats(const ParallelCorpus& corpus, Side side) {
  if (corpus.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  SideStats st;
  std::set<std::string> types;
  std::size_t total_units = 0, total_token_units = 0;
  for (const auto& p : corpus.pairs) {
    if (side == Side::source) {
      for (const auto& tok : p.source_tokens) {
        types.insert(tok);
        total_token_units += utf8_length(tok);
      }
      st.tokens += p.source_tokens.size();
      for (const auto& tok : p.source_tokens) total_units += utf8_length(tok);
    } else {
      Segmentation seg = p.gold_boundaries
                             ? *p.gold_boundaries
                             : Segmentation({}, static_cast<int>(p.target_phonemes.size()));
      for (const auto& w : apply_segmentation(p.target_phonemes, seg)) {
        types.insert(join(w, ""));
        total_token_units += w.size();
        ++st.tokens;
      }
      total_units += p.target_phonemes.size();
    }
  }
  st.types = types.size();
  st.mean_token_length = st.tokens ? static_cast<double>(total_token_units) / st.tokens : 0.0;
  st.mean_tokens_per_sentence = static_cast<double>(st.tokens) / corpus.pairs.size();
  st.mean_units_per_sentence = static_cast<double>(total_units) / corpus.pairs.size();
  return st;
}

}  // namespace phonseg
