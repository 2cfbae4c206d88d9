#include "phonseg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "phonseg/align.hpp"
#include "phonseg/bayes.hpp"
#include "phonseg/metrics.hpp"
#include "phonseg/model.hpp"
#include "phonseg/soft_alignment.hpp"
#include "phonseg/text.hpp"
#include "phonseg/train.hpp"
#include "phonseg/vocab.hpp"

namespace fs = std::filesystem;

namespace phonseg {

namespace {

const std::vector<std::string> kModes = {"bayes", "neural", "hybrid", "proportional"};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw std::runtime_error("cannot parse " + what + ": '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw std::runtime_error("cannot parse " + what + ": '" + s + "'");
  return v;
}

double override_d(const ExperimentManifest& m, const std::string& key, double fallback) {
  auto it = m.overrides.find(key);
  return it == m.overrides.end() ? fallback : parse_double(it->second, "override " + key);
}

int override_i(const ExperimentManifest& m, const std::string& key, int fallback) {
  auto it = m.overrides.find(key);
  if (it == m.overrides.end()) return fallback;
  return static_cast<int>(parse_u64(it->second, "override " + key));
}

std::string override_s(const ExperimentManifest& m, const std::string& key,
                       const std::string& fallback) {
  auto it = m.overrides.find(key);
  return it == m.overrides.end() ? fallback : it->second;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

std::string seeds_label(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::string seeds_csv(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds_csv(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(parse_u64(cur, "seed"));
  return out;
}

}  // namespace

const std::vector<std::string>& manifest_override_keys() {
  static const std::vector<std::string> keys = {
      "valid_fraction",    "split_seed",        "max_pivot_tokens",
      "marker",            "min_count",         "max_decode_factor",
      "gibbs.sweeps",      "gibbs.alpha0",      "gibbs.p_boundary",
      "gibbs.init_boundary_prob",               "gibbs.seed",
      "train.max_epochs",  "train.batch_size",  "train.learning_rate",
      "train.patience",    "model.src_embed",   "model.enc_hidden",
      "model.tgt_embed",   "model.dec_hidden",  "model.attn_hidden",
  };
  return keys;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read manifest: " + path);
  ExperimentManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto fields = split_whitespace(line);
    if (fields.empty() || fields[0][0] == '#') continue;
    const std::string& d = fields[0];
    const std::string where = path + ":" + std::to_string(lineno);
    auto need = [&](std::size_t n) {
      if (fields.size() != n + 1)
        throw std::runtime_error(where + ": directive '" + d + "' takes " + std::to_string(n) +
                                 " field(s)");
    };
    if (d == "language") {
      need(2);
      m.languages.emplace_back(fields[1], fields[2]);
    } else if (d == "pivot") {
      need(1);
      m.pivot = fields[1];
    } else if (d == "pair") {
      need(2);
      m.pairs.emplace_back(fields[1], fields[2]);
    } else if (d == "mode") {
      need(1);
      m.mode = fields[1];
    } else if (d == "seed") {
      need(1);
      m.seeds.push_back(parse_u64(fields[1], where + " seed"));
    } else if (d == "output_dir") {
      need(1);
      m.output_dir = fields[1];
    } else if (d == "inventory") {
      need(1);
      m.inventory_path = fields[1];
    } else if (d == "set") {
      need(2);
      m.overrides[fields[1]] = fields[2];
    } else {
      throw std::runtime_error(where + ": unknown directive '" + d + "'");
    }
  }
  m.validate();
  return m;
}

void ExperimentManifest::validate() const {
  if (languages.empty()) throw std::runtime_error("manifest declares no languages");
  std::set<std::string> names;
  for (const auto& [name, file] : languages)
    if (!names.insert(name).second)
      throw std::runtime_error("manifest declares language '" + name + "' twice");
  if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end())
    throw std::runtime_error("manifest mode '" + mode + "' is not one of " + join(kModes, "/"));
  for (const auto& [s, t] : pairs) {
    if (!names.count(s) || !names.count(t))
      throw std::runtime_error("manifest pair " + s + "-" + t + " references an undeclared language");
    if (s == t) throw std::runtime_error("manifest pair " + s + "-" + t + " is not bilingual");
  }
  if (!pivot.empty() && !names.count(pivot))
    throw std::runtime_error("manifest pivot '" + pivot + "' is not a declared language");
  if (pairs.empty() && languages.size() < 2)
    throw std::runtime_error("a grid needs at least 2 languages");
  const auto& known = manifest_override_keys();
  for (const auto& [key, value] : overrides)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::runtime_error("unknown override '" + key + "'; valid keys: " + join(known, ", "));
}

const std::string& ExperimentManifest::language_path(const std::string& name) const {
  for (const auto& [lang, file] : languages)
    if (lang == name) return file;
  throw std::runtime_error("language '" + name + "' is not declared in the manifest");
}

std::vector<std::pair<std::string, std::string>> ExperimentManifest::grid_pairs() const {
  if (!pairs.empty()) return pairs;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [src, sp] : languages)
    for (const auto& [tgt, tp] : languages)
      if (src != tgt) out.emplace_back(src, tgt);
  return out;
}

std::vector<std::uint64_t> ExperimentManifest::effective_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{1, 2} : seeds;
}

std::string serialize_report(const RunReport& r) {
  std::ostringstream out;
  auto kv = [&](const std::string& k, const std::string& v) { out << k << '\t' << v << '\n'; };
  std::string error = r.error;
  for (char& c : error)
    if (c == '\t' || c == '\n') c = ' ';
  kv("pair", r.pair_id);
  kv("source", r.source);
  kv("target", r.target);
  kv("mode", r.mode);
  kv("seeds", seeds_csv(r.seeds));
  kv("ok", r.ok ? "1" : "0");
  kv("error", error);
  kv("sentences", std::to_string(r.sentences));
  kv("train_sentences", std::to_string(r.train_sentences));
  kv("valid_sentences", std::to_string(r.valid_sentences));
  kv("has_gold", r.has_gold ? "1" : "0");
  kv("boundary_p", fmt17(r.boundary_p));
  kv("boundary_r", fmt17(r.boundary_r));
  kv("boundary_f", fmt17(r.boundary_f));
  kv("type_p", fmt17(r.type_p));
  kv("type_r", fmt17(r.type_r));
  kv("type_f", fmt17(r.type_f));
  kv("discovered_types", std::to_string(r.discovered_types));
  kv("mean_token_length", fmt17(r.mean_token_length));
  kv("bleu", fmt17(r.bleu));
  return out.str();
}

RunReport parse_report(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("report line lacks a TAB: " + line);
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error("report is missing key '" + k + "'");
    return it->second;
  };
  RunReport r;
  r.pair_id = get("pair");
  r.source = get("source");
  r.target = get("target");
  r.mode = get("mode");
  r.seeds = parse_seeds_csv(get("seeds"));
  r.ok = get("ok") == "1";
  r.error = get("error");
  r.sentences = static_cast<long>(parse_u64(get("sentences"), "sentences"));
  r.train_sentences = static_cast<long>(parse_u64(get("train_sentences"), "train_sentences"));
  r.valid_sentences = static_cast<long>(parse_u64(get("valid_sentences"), "valid_sentences"));
  r.has_gold = get("has_gold") == "1";
  r.boundary_p = parse_double(get("boundary_p"), "boundary_p");
  r.boundary_r = parse_double(get("boundary_r"), "boundary_r");
  r.boundary_f = parse_double(get("boundary_f"), "boundary_f");
  r.type_p = parse_double(get("type_p"), "type_p");
  r.type_r = parse_double(get("type_r"), "type_r");
  r.type_f = parse_double(get("type_f"), "type_f");
  r.discovered_types = static_cast<long>(parse_u64(get("discovered_types"), "discovered_types"));
  r.mean_token_length = parse_double(get("mean_token_length"), "mean_token_length");
  r.bleu = parse_double(get("bleu"), "bleu");
  return r;
}

namespace {

struct Prepared {
  ParallelCorpus all, train, valid;
  std::vector<Segmentation> gold;
  bool has_gold = false;
  std::vector<std::vector<std::string>> target_seqs;  // phonemes per sentence, corpus order
};

Prepared prepare_pair(const ExperimentManifest& m, const std::string& source,
                      const std::string& target) {
  PhonemeInventory inventory;
  const PhonemeInventory* inv = nullptr;
  if (!m.inventory_path.empty()) {
    inventory = PhonemeInventory::load(m.inventory_path);
    inv = &inventory;
  }
  ParallelCorpus src_c = load_corpus(m.language_path(source), source, source, nullptr);
  ParallelCorpus tgt_c = load_corpus(m.language_path(target), target, target, inv);
  Prepared prep;
  prep.all = pair_corpus(src_c, tgt_c);
  if (!m.pivot.empty()) {
    const int max_tokens = override_i(m, "max_pivot_tokens", 100);
    if (m.pivot == source) {
      prep.all = filter_by_length(prep.all, src_c, max_tokens);
    } else if (m.pivot == target) {
      prep.all = filter_by_length(prep.all, tgt_c, max_tokens);
    } else {
      ParallelCorpus piv = load_corpus(m.language_path(m.pivot), m.pivot, m.pivot, nullptr);
      prep.all = filter_by_length(prep.all, piv, max_tokens);
    }
  }
  if (prep.all.empty()) throw std::runtime_error("no sentences left after pairing/filtering");

  const double valid_fraction = override_d(m, "valid_fraction", 0.1);
  const std::uint64_t split_seed = parse_u64(override_s(m, "split_seed", "42"), "split_seed");
  std::tie(prep.train, prep.valid) = split_train_valid(prep.all, valid_fraction, split_seed);

  prep.has_gold = true;
  for (const auto& p : prep.all.pairs) {
    prep.target_seqs.push_back(p.target_phonemes);
    if (!p.gold_boundaries) prep.has_gold = false;
  }
  if (prep.has_gold)
    for (const auto& p : prep.all.pairs) prep.gold.push_back(*p.gold_boundaries);
  return prep;
}

void fill_eval(RunReport& r, const Prepared& prep, const std::vector<Segmentation>& hyp) {
  r.sentences = static_cast<long>(prep.all.size());
  r.train_sentences = static_cast<long>(prep.train.size());
  r.valid_sentences = static_cast<long>(prep.valid.size());
  r.has_gold = prep.has_gold;
  r.mean_token_length = mean_token_length(hyp);
  r.discovered_types = static_cast<long>(segmentation_types(prep.target_seqs, hyp).size());
  if (prep.has_gold) {
    const BoundaryScore b = boundary_prf(prep.gold, hyp);
    r.boundary_p = b.precision;
    r.boundary_r = b.recall;
    r.boundary_f = b.f1;
    const TypeScore t = type_metrics(prep.target_seqs, prep.gold, hyp);
    r.type_p = t.precision;
    r.type_r = t.recall;
    r.type_f = t.f1;
  }
}

BayesHyperparams gibbs_hyperparams(const ExperimentManifest& m, const ParallelCorpus& corpus) {
  return hyperparams_for_corpus(corpus, override_d(m, "gibbs.alpha0", 20.0),
                                override_d(m, "gibbs.p_boundary", 0.5));
}

GibbsConfig gibbs_config(const ExperimentManifest& m) {
  GibbsConfig cfg = GibbsConfig::defaults(override_i(m, "gibbs.sweeps", 2000),
                                          parse_u64(override_s(m, "gibbs.seed", "1"), "gibbs.seed"));
  cfg.init_boundary_prob = override_d(m, "gibbs.init_boundary_prob", 0.3);
  return cfg;
}

void write_gibbs_artifacts(const fs::path& dir, const BayesResult& result) {
  std::ostringstream log;
  log << "temperature\tsweeps\tjoint_log_prob\n";
  for (const auto& stage : result.log)
    log << fmt17(stage.temperature) << '\t' << stage.sweeps << '\t'
        << fmt17(stage.joint_log_prob) << '\n';
  write_file(dir / "gibbs-log.tsv", log.str());

  std::ostringstream lex;
  lex << "count\tword\n";
  for (const auto& [word, count] : result.lexicon.counts)
    lex << count << '\t' << join(word, "") << '\n';
  write_file(dir / "lexicon.tsv", lex.str());
}

ModelConfig model_config(const ExperimentManifest& m) {
  ModelConfig c;
  c.src_embed = override_i(m, "model.src_embed", c.src_embed);
  c.enc_hidden = override_i(m, "model.enc_hidden", c.enc_hidden);
  c.tgt_embed = override_i(m, "model.tgt_embed", c.tgt_embed);
  c.dec_hidden = override_i(m, "model.dec_hidden", c.dec_hidden);
  c.attn_hidden = override_i(m, "model.attn_hidden", c.attn_hidden);
  return c;
}

TrainConfig train_config(const ExperimentManifest& m, std::uint64_t seed) {
  TrainConfig c;
  c.max_epochs = override_i(m, "train.max_epochs", c.max_epochs);
  c.batch_size = override_i(m, "train.batch_size", c.batch_size);
  c.learning_rate = override_d(m, "train.learning_rate", c.learning_rate);
  c.patience = override_i(m, "train.patience", c.patience);
  c.seed = seed;
  return c;
}

std::string train_log_tsv(const TrainResult& result) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tvalid_loss\n";
  for (const auto& e : result.log)
    out << e.epoch << '\t' << fmt17(e.train_loss) << '\t' << fmt17(e.valid_loss) << '\n';
  out << "# best epoch " << result.best_epoch << ", valid loss " << fmt17(result.best_valid_loss)
      << '\n';
  return out.str();
}

// The neural pipeline, shared by neural and hybrid modes. `work` carries the
// training targets (marker-augmented in hybrid mode).
struct NeuralOutput {
  std::vector<SoftAlignmentMatrix> matrices;  // averaged over seeds, corpus order
  double bleu = 0.0;                          // mean of per-seed valid BLEU, 0 if no valid set
};

NeuralOutput run_neural_stage(const ExperimentManifest& m, const fs::path& dir,
                              const ParallelCorpus& work, const std::string& marker_to_strip) {
  const double valid_fraction = override_d(m, "valid_fraction", 0.1);
  const std::uint64_t split_seed = parse_u64(override_s(m, "split_seed", "42"), "split_seed");
  auto [train_c, valid_c] = split_train_valid(work, valid_fraction, split_seed);

  std::vector<std::vector<std::string>> src_seqs, tgt_seqs;
  for (const auto& p : train_c.pairs) {
    src_seqs.push_back(p.source_tokens);
    tgt_seqs.push_back(p.target_phonemes);
  }
  const int min_count = override_i(m, "min_count", 1);
  const Vocab src_vocab = build_vocab(src_seqs, min_count);
  const Vocab tgt_vocab = build_vocab(tgt_seqs, min_count);

  const double decode_factor = override_d(m, "max_decode_factor", 2.0);
  const ModelConfig mc = model_config(m);
  const std::vector<std::uint64_t> seeds = m.effective_seeds();

  std::vector<std::vector<SoftAlignmentMatrix>> per_sentence(work.size());
  std::vector<double> bleus;
  for (const std::uint64_t seed : seeds) {
    Model<float> model;
    model.init(src_vocab.size(), tgt_vocab.size(), mc);
    TrainConfig tc = train_config(m, seed);
    const TrainResult tres = train_model(model, encode_pairs(train_c, src_vocab, tgt_vocab),
                                         encode_pairs(valid_c, src_vocab, tgt_vocab), tc);
    const std::string tag = "seed" + std::to_string(seed);
    write_file(dir / ("train-log-" + tag + ".tsv"), train_log_tsv(tres));
    save_model(model, src_vocab, tgt_vocab, (dir / ("model-" + tag + ".bin")).string());

    for (std::size_t i = 0; i < work.size(); ++i)
      per_sentence[i].push_back(forced_decode_matrix(
          model, src_vocab, tgt_vocab, work.pairs[i].source_tokens, work.pairs[i].target_phonemes));

    if (!valid_c.empty()) {
      std::vector<std::vector<std::string>> hyps, refs;
      std::ostringstream decoded;
      for (std::size_t i = 0; i < valid_c.size(); ++i) {
        const auto& p = valid_c.pairs[i];
        const int max_len =
            std::max(5, static_cast<int>(std::ceil(decode_factor *
                                                   static_cast<double>(p.target_phonemes.size()))));
        std::vector<std::string> hyp = greedy_decode(model, src_vocab, tgt_vocab, p.source_tokens,
                                                     max_len);
        if (!marker_to_strip.empty())
          hyp.erase(std::remove(hyp.begin(), hyp.end(), marker_to_strip), hyp.end());
        decoded << p.id << '\t' << join(hyp, " ") << '\n';
        hyps.push_back(std::move(hyp));
        // references never carry markers: strip if the work corpus was augmented
        std::vector<std::string> ref = p.target_phonemes;
        if (!marker_to_strip.empty())
          ref.erase(std::remove(ref.begin(), ref.end(), marker_to_strip), ref.end());
        refs.push_back(std::move(ref));
      }
      write_file(dir / ("decoded-" + tag + ".tsv"), decoded.str());
      bleus.push_back(bleu4(hyps, refs));
    }
  }

  NeuralOutput out;
  out.matrices.reserve(work.size());
  const fs::path matrix_dir = dir / "matrices";
  fs::create_directories(matrix_dir);
  for (std::size_t i = 0; i < work.size(); ++i) {
    SoftAlignmentMatrix avg = average_matrices(per_sentence[i]);
    save_matrix(avg, (matrix_dir / (work.pairs[i].id + ".txt")).string());
    out.matrices.push_back(std::move(avg));
  }
  if (!bleus.empty()) {
    for (double b : bleus) out.bleu += b;
    out.bleu /= static_cast<double>(bleus.size());
  }
  return out;
}

std::string run_dir_name(const ExperimentManifest& m, const std::string& source,
                         const std::string& target, const std::string& mode,
                         const std::vector<std::uint64_t>& seeds) {
  std::ostringstream canon;
  canon << mode << ';' << seeds_csv(seeds) << ';' << m.pivot << ';' << m.inventory_path;
  for (const auto& [k, v] : m.overrides) canon << ';' << k << '=' << v;
  const std::uint64_t h = fnv1a64(canon.str());
  char hash8[16];
  std::snprintf(hash8, sizeof(hash8), "%08x",
                static_cast<unsigned>((h ^ (h >> 32)) & 0xffffffffu));
  return source + "-" + target + "_" + mode + "_s" + seeds_label(seeds) + "_" + hash8;
}

std::vector<std::uint64_t> seeds_for_mode(const ExperimentManifest& m, const std::string& mode) {
  if (mode == "neural" || mode == "hybrid") return m.effective_seeds();
  if (mode == "bayes")
    return {parse_u64(override_s(m, "gibbs.seed", "1"), "gibbs.seed")};
  return {};
}

}  // namespace

RunReport run_pair(const ExperimentManifest& manifest, const std::string& source,
                   const std::string& target, const std::string& mode) {
  RunReport report;
  report.pair_id = source + "-" + target;
  report.source = source;
  report.target = target;
  report.mode = mode;
  report.seeds = seeds_for_mode(manifest, mode);

  const auto started = std::chrono::steady_clock::now();
  const fs::path out_root = manifest.output_dir;
  const fs::path run_dir = out_root / run_dir_name(manifest, source, target, mode, report.seeds);
  const fs::path tmp_dir = run_dir.string() + ".tmp";

  try {
    if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end())
      throw std::runtime_error("unknown mode '" + mode + "'; valid: " + join(kModes, "/"));
    manifest.language_path(source);
    manifest.language_path(target);
    if (source == target) throw std::runtime_error("source and target language are the same");

    if (fs::exists(run_dir / "report.tsv")) {
      RunReport resumed = parse_report(read_file(run_dir / "report.tsv"));
      resumed.wall_seconds = 0.0;
      return resumed;
    }
    fs::remove_all(run_dir);  // a directory without a report is a stale failure
    fs::remove_all(tmp_dir);
    fs::create_directories(tmp_dir);

    const Prepared prep = prepare_pair(manifest, source, target);
    std::vector<Segmentation> hyp;

    if (mode == "proportional") {
      for (const auto& p : prep.all.pairs) {
        std::vector<int> lengths;
        for (const auto& tok : p.source_tokens)
          lengths.push_back(static_cast<int>(utf8_length(tok)));
        hyp.push_back(proportional_segment(lengths, static_cast<int>(p.target_phonemes.size())));
      }
    } else if (mode == "bayes") {
      const BayesResult result =
          segment_corpus(prep.all, gibbs_hyperparams(manifest, prep.all), gibbs_config(manifest));
      write_gibbs_artifacts(tmp_dir, result);
      hyp = result.segmentations;
    } else if (mode == "neural") {
      const NeuralOutput out = run_neural_stage(manifest, tmp_dir, prep.all, "");
      report.bleu = out.bleu;
      std::vector<AlignedSegmentation> aligned;
      for (const auto& matrix : out.matrices) aligned.push_back(attention_segment(matrix));
      for (const auto& a : aligned) hyp.push_back(a.segmentation);
      write_ranking(rank_alignments(aligned, out.matrices), (tmp_dir / "ranking.tsv").string());
    } else {  // hybrid
      const std::string marker = override_s(manifest, "marker", "‹B›");
      const BayesResult bayes =
          segment_corpus(prep.all, gibbs_hyperparams(manifest, prep.all), gibbs_config(manifest));
      write_gibbs_artifacts(tmp_dir, bayes);

      ParallelCorpus augmented = prep.all;
      for (std::size_t i = 0; i < augmented.pairs.size(); ++i) {
        auto& p = augmented.pairs[i];
        p.target_phonemes =
            insert_soft_boundaries(p.target_phonemes, bayes.segmentations[i], marker);
        p.gold_boundaries.reset();
      }
      const NeuralOutput out = run_neural_stage(manifest, tmp_dir, augmented, marker);
      report.bleu = out.bleu;
      std::vector<AlignedSegmentation> aligned;
      for (const auto& matrix : out.matrices) aligned.push_back(hybrid_segment(matrix, marker));
      for (const auto& a : aligned) hyp.push_back(a.segmentation);
      write_ranking(rank_alignments(aligned, out.matrices), (tmp_dir / "ranking.tsv").string());
    }

    fill_eval(report, prep, hyp);
    report.ok = true;
    write_segmented(prep.all, hyp, (tmp_dir / "segmentation.tsv").string());
    write_file(tmp_dir / "report.tsv", serialize_report(report));

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    {
      std::ostringstream timing;
      timing << "wall_seconds\t" << report.wall_seconds << '\n';
      write_file(tmp_dir / "timing.tsv", timing.str());
    }
    fs::rename(tmp_dir, run_dir);
    return report;
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    try {
      fs::create_directories(tmp_dir);
      std::ostringstream failure;
      failure << "pair\t" << report.pair_id << "\nmode\t" << mode << "\nerror\t" << report.error
              << '\n';
      write_file(tmp_dir / "failure.tsv", failure.str());
      fs::remove_all(run_dir);
      fs::rename(tmp_dir, run_dir);
    } catch (const std::exception&) {
      // never mask the original failure with bookkeeping errors
    }
    return report;
  }
}

std::vector<RunReport> run_grid(const ExperimentManifest& manifest, int workers) {
  manifest.validate();
  const auto pairs = manifest.grid_pairs();
  if (workers <= 0) {
    if (const char* env = std::getenv("PHONSEG_WORKERS")) workers = std::atoi(env);
    if (workers <= 0) workers = 1;
  }
  workers = std::min<int>(workers, static_cast<int>(pairs.size()));
  workers = std::max(workers, 1);
  fs::create_directories(manifest.output_dir);

  std::vector<RunReport> reports(pairs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pairs.size()) break;
      reports[k] = run_pair(manifest, pairs[k].first, pairs[k].second, manifest.mode);
      std::lock_guard<std::mutex> lock(log_mutex);
      if (reports[k].ok)
        std::fprintf(stderr, "[grid] %s %s ok boundary_f=%.4f bleu=%.2f\n",
                     reports[k].pair_id.c_str(), manifest.mode.c_str(), reports[k].boundary_f,
                     reports[k].bleu);
      else
        std::fprintf(stderr, "[grid] %s %s FAILED: %s\n", reports[k].pair_id.c_str(),
                     manifest.mode.c_str(), reports[k].error.c_str());
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return reports;
}

const std::vector<std::string>& grid_metric_names() {
  static const std::vector<std::string> names = {
      "boundary_p", "boundary_r", "boundary_f", "f1",   "type_p",
      "type_r",     "type_f",     "bleu",       "types", "mean_token_length",
  };
  return names;
}

namespace {

double metric_value(const RunReport& r, const std::string& metric) {
  if (metric == "boundary_p") return r.boundary_p;
  if (metric == "boundary_r") return r.boundary_r;
  if (metric == "boundary_f" || metric == "f1") return r.boundary_f;
  if (metric == "type_p") return r.type_p;
  if (metric == "type_r") return r.type_r;
  if (metric == "type_f") return r.type_f;
  if (metric == "bleu") return r.bleu;
  if (metric == "types") return static_cast<double>(r.discovered_types);
  if (metric == "mean_token_length") return r.mean_token_length;
  throw std::runtime_error("unknown metric '" + metric +
                           "'; valid metrics: " + join(grid_metric_names(), ", "));
}

}  // namespace

void emit_grid_report(const std::vector<RunReport>& reports, const std::string& metric,
                      const std::string& matrix_path, const std::string& long_path) {
  if (reports.empty()) throw std::runtime_error("no reports to tabulate");
  metric_value(reports.front(), metric);  // reject unknown metric names up front

  std::vector<std::string> sources, targets;
  for (const auto& r : reports) {
    if (std::find(sources.begin(), sources.end(), r.source) == sources.end())
      sources.push_back(r.source);
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end())
      targets.push_back(r.target);
  }
  std::map<std::pair<std::string, std::string>, const RunReport*> by_pair;
  for (const auto& r : reports) by_pair[{r.source, r.target}] = &r;

  std::ostringstream matrix;
  matrix << "source\\target";
  for (const auto& t : targets) matrix << '\t' << t;
  matrix << '\n';
  for (const auto& s : sources) {
    matrix << s;
    for (const auto& t : targets) {
      matrix << '\t';
      if (s == t) continue;  // diagonal stays empty
      auto it = by_pair.find({s, t});
      if (it == by_pair.end() || !it->second->ok) continue;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", metric_value(*it->second, metric));
      matrix << buf;
    }
    matrix << '\n';
  }
  write_file(matrix_path, matrix.str());

  std::ostringstream longform;
  longform << "source\ttarget\tmode\tseeds\tok\tsentences\tboundary_p\tboundary_r\tboundary_f"
           << "\ttype_p\ttype_r\ttype_f\tdiscovered_types\tmean_token_length\tbleu\terror\n";
  for (const auto& r : reports) {
    std::string error = r.error;
    for (char& c : error)
      if (c == '\t' || c == '\n') c = ' ';
    longform << r.source << '\t' << r.target << '\t' << r.mode << '\t' << seeds_csv(r.seeds)
             << '\t' << (r.ok ? 1 : 0) << '\t' << r.sentences << '\t' << fmt17(r.boundary_p)
             << '\t' << fmt17(r.boundary_r) << '\t' << fmt17(r.boundary_f) << '\t'
             << fmt17(r.type_p) << '\t' << fmt17(r.type_r) << '\t' << fmt17(r.type_f) << '\t'
             << r.discovered_types << '\t' << fmt17(r.mean_token_length) << '\t' << fmt17(r.bleu)
             << '\t' << error << '\n';
  }
  write_file(long_path, longform.str());
}

std::vector<RunReport> collect_reports(const std::string& output_dir) {
  if (!fs::is_directory(output_dir))
    throw std::runtime_error("not a run directory: " + output_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(output_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "report.tsv"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunReport> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(parse_report(read_file(d / "report.tsv")));
  return out;
}

}  // namespace phonseg
