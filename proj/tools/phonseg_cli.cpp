// phonseg: unsupervised word segmentation of phoneme sequences, monolingual
// (Gibbs-sampled lexicon model) and bilingual (attention-based, hybrid, and
// proportional), plus evaluation and alignment-confidence tooling.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phonseg/align.hpp"
#include "phonseg/bayes.hpp"
#include "phonseg/corpus.hpp"
#include "phonseg/harness.hpp"
#include "phonseg/metrics.hpp"
#include "phonseg/model.hpp"
#include "phonseg/soft_alignment.hpp"
#include "phonseg/text.hpp"
#include "phonseg/train.hpp"
#include "phonseg/vocab.hpp"

namespace fs = std::filesystem;
using namespace phonseg;

namespace {

ParallelCorpus load_with_inventory(const std::string& path, const std::string& inventory_path) {
  PhonemeInventory inv;
  const PhonemeInventory* invp = nullptr;
  if (!inventory_path.empty()) {
    inv = PhonemeInventory::load(inventory_path);
    invp = &inv;
  }
  return load_corpus(path, "src", "tgt", invp);
}

GibbsConfig gibbs_config_from(int sweeps, std::uint64_t seed, double init_boundary_prob) {
  GibbsConfig cfg = GibbsConfig::defaults(sweeps, seed);
  cfg.init_boundary_prob = init_boundary_prob;
  return cfg;
}

std::vector<Segmentation> gold_of(const ParallelCorpus& corpus, const std::string& what) {
  std::vector<Segmentation> gold;
  for (const auto& p : corpus.pairs) {
    if (!p.gold_boundaries)
      throw std::runtime_error(what + ": pair '" + p.id + "' has no word boundaries in field 3");
    gold.push_back(*p.gold_boundaries);
  }
  return gold;
}

void print_eval(std::ostream& out, const ParallelCorpus& gold_c, const ParallelCorpus& hyp_c) {
  if (gold_c.size() != hyp_c.size())
    throw std::runtime_error("evaluate: corpora differ in sentence count");
  std::vector<std::vector<std::string>> seqs;
  for (std::size_t i = 0; i < gold_c.size(); ++i) {
    if (gold_c.pairs[i].id != hyp_c.pairs[i].id)
      throw std::runtime_error("evaluate: id mismatch at sentence " + std::to_string(i) + " ('" +
                               gold_c.pairs[i].id + "' vs '" + hyp_c.pairs[i].id + "')");
    if (gold_c.pairs[i].target_phonemes != hyp_c.pairs[i].target_phonemes)
      throw std::runtime_error("evaluate: phoneme sequences differ for id '" +
                               gold_c.pairs[i].id + "'");
    seqs.push_back(gold_c.pairs[i].target_phonemes);
  }
  const auto gold = gold_of(gold_c, "evaluate --gold");
  const auto hyp = gold_of(hyp_c, "evaluate --hyp");
  const BoundaryScore b = boundary_prf(gold, hyp);
  const TypeScore t = type_metrics(seqs, gold, hyp);
  char line[256];
  auto kv = [&](const char* k, double v) {
    std::snprintf(line, sizeof(line), "%s\t%.17g\n", k, v);
    out << line;
  };
  out << "sentences\t" << gold_c.size() << '\n';
  kv("boundary_p", b.precision);
  kv("boundary_r", b.recall);
  kv("boundary_f", b.f1);
  kv("type_p", t.precision);
  kv("type_r", t.recall);
  kv("type_f", t.f1);
  out << "discovered_types\t" << t.hyp_types << '\n';
  out << "gold_types\t" << t.gold_types << '\n';
  kv("mean_token_length", mean_token_length(hyp));
}

std::vector<fs::path> matrix_files(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .txt matrices under " + dir);
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual unsupervised word segmentation workbench"};
  app.require_subcommand(1);

  // ---- segment-bayes ----
  auto* sb = app.add_subcommand("segment-bayes",
                                "Monolingual lexicon-model segmentation via Gibbs sampling");
  std::string sb_input, sb_output, sb_inventory, sb_lexicon, sb_log;
  int sb_sweeps = 2000;
  double sb_alpha0 = 20.0, sb_p_boundary = 0.5, sb_init_p = 0.3;
  std::uint64_t sb_seed = 1;
  sb->add_option("--input", sb_input, "corpus TSV (id, words, phonemes)")->required();
  sb->add_option("--output", sb_output, "segmented corpus TSV")->required();
  sb->add_option("--inventory", sb_inventory, "phoneme inventory file (one symbol per line)");
  sb->add_option("--sweeps", sb_sweeps, "total Gibbs sweeps");
  sb->add_option("--alpha0", sb_alpha0, "concentration parameter");
  sb->add_option("--p-boundary", sb_p_boundary, "word-end probability of the base distribution");
  sb->add_option("--init-boundary-prob", sb_init_p, "initial boundary probability");
  sb->add_option("--seed", sb_seed, "sampler seed");
  sb->add_option("--lexicon", sb_lexicon, "write the final lexicon (count TAB word)");
  sb->add_option("--log", sb_log, "write per-stage joint log-probability TSV");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train one attention encoder-decoder");
  std::string tr_corpus, tr_model, tr_log, tr_inventory;
  double tr_valid_fraction = 0.1, tr_lr = 1e-3;
  std::uint64_t tr_split_seed = 42, tr_seed = 1;
  int tr_epochs = 150, tr_batch = 32, tr_patience = 10, tr_min_count = 1;
  ModelConfig tr_mc;
  tr->add_option("--corpus", tr_corpus, "corpus TSV (id, source words, target phonemes)")
      ->required();
  tr->add_option("--output", tr_model, "model checkpoint path")->required();
  tr->add_option("--inventory", tr_inventory, "phoneme inventory file");
  tr->add_option("--valid-fraction", tr_valid_fraction, "validation share of the corpus");
  tr->add_option("--split-seed", tr_split_seed, "id-hash seed of the train/valid split");
  tr->add_option("--seed", tr_seed, "initialization/shuffling seed");
  tr->add_option("--epochs", tr_epochs, "max epochs");
  tr->add_option("--batch-size", tr_batch, "batch size");
  tr->add_option("--learning-rate", tr_lr, "adaptive-moment learning rate");
  tr->add_option("--patience", tr_patience, "early-stopping patience (epochs)");
  tr->add_option("--min-count", tr_min_count, "tokens rarer than this become UNK");
  tr->add_option("--src-embed", tr_mc.src_embed, "source embedding size");
  tr->add_option("--enc-hidden", tr_mc.enc_hidden, "encoder state size per direction");
  tr->add_option("--tgt-embed", tr_mc.tgt_embed, "target embedding size");
  tr->add_option("--dec-hidden", tr_mc.dec_hidden, "decoder state size per layer");
  tr->add_option("--attn-hidden", tr_mc.attn_hidden, "attention hidden layer size");
  tr->add_option("--log", tr_log, "write the per-epoch loss TSV");

  // ---- segment-attn ----
  auto* sa = app.add_subcommand(
      "segment-attn", "Segment with soft-alignment matrices from trained models (averaged)");
  std::string sa_corpus, sa_output, sa_matrices, sa_ranking, sa_inventory;
  std::vector<std::string> sa_models;
  sa->add_option("--corpus", sa_corpus, "corpus TSV")->required();
  sa->add_option("--model", sa_models, "model checkpoint (repeat to average seeds)")->required();
  sa->add_option("--output", sa_output, "segmented corpus TSV")->required();
  sa->add_option("--inventory", sa_inventory, "phoneme inventory file");
  sa->add_option("--matrices", sa_matrices, "directory for averaged matrices");
  sa->add_option("--ranking", sa_ranking, "write the confidence ranking TSV");

  // ---- segment-prop ----
  auto* sp = app.add_subcommand("segment-prop",
                                "Proportional baseline: split the phoneme sequence at positions "
                                "proportional to source word letter counts");
  std::string sp_corpus, sp_output, sp_inventory;
  sp->add_option("--corpus", sp_corpus, "corpus TSV")->required();
  sp->add_option("--output", sp_output, "segmented corpus TSV")->required();
  sp->add_option("--inventory", sp_inventory, "phoneme inventory file");

  // ---- hybrid ----
  auto* hy = app.add_subcommand(
      "hybrid", "Monolingual segmentation as soft boundaries, then attention segmentation");
  std::string hy_corpus, hy_output, hy_inventory, hy_marker = "‹B›";
  std::string hy_matrices, hy_ranking, hy_model_prefix;
  std::vector<std::uint64_t> hy_seeds = {1, 2};
  int hy_sweeps = 2000, hy_epochs = 150, hy_batch = 32, hy_patience = 10;
  double hy_alpha0 = 20.0, hy_p_boundary = 0.5, hy_init_p = 0.3, hy_lr = 1e-3;
  double hy_valid_fraction = 0.1;
  std::uint64_t hy_gibbs_seed = 1, hy_split_seed = 42;
  hy->add_option("--corpus", hy_corpus, "corpus TSV")->required();
  hy->add_option("--output", hy_output, "segmented corpus TSV")->required();
  hy->add_option("--inventory", hy_inventory, "phoneme inventory file");
  hy->add_option("--marker", hy_marker, "soft-boundary marker symbol");
  hy->add_option("--seeds", hy_seeds, "network seeds (matrices averaged across them)");
  hy->add_option("--sweeps", hy_sweeps, "Gibbs sweeps");
  hy->add_option("--alpha0", hy_alpha0, "concentration parameter");
  hy->add_option("--p-boundary", hy_p_boundary, "word-end probability");
  hy->add_option("--init-boundary-prob", hy_init_p, "initial boundary probability");
  hy->add_option("--gibbs-seed", hy_gibbs_seed, "sampler seed");
  hy->add_option("--epochs", hy_epochs, "max epochs");
  hy->add_option("--batch-size", hy_batch, "batch size");
  hy->add_option("--learning-rate", hy_lr, "learning rate");
  hy->add_option("--patience", hy_patience, "early-stopping patience");
  hy->add_option("--valid-fraction", hy_valid_fraction, "validation share");
  hy->add_option("--split-seed", hy_split_seed, "train/valid split seed");
  hy->add_option("--matrices", hy_matrices, "directory for averaged matrices");
  hy->add_option("--ranking", hy_ranking, "write the confidence ranking TSV");
  hy->add_option("--model-out", hy_model_prefix, "checkpoint path prefix (one file per seed)");

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "Boundary and type metrics of hyp vs gold corpus");
  std::string ev_gold, ev_hyp, ev_output, ev_inventory;
  ev->add_option("--gold", ev_gold, "gold-segmented corpus TSV")->required();
  ev->add_option("--hyp", ev_hyp, "hypothesis-segmented corpus TSV")->required();
  ev->add_option("--inventory", ev_inventory, "phoneme inventory file");
  ev->add_option("--output", ev_output, "report path (default: stdout)");

  // ---- rank ----
  auto* rk = app.add_subcommand(
      "rank", "Rank (span, source word) alignments by average normalized entropy");
  std::string rk_matrices, rk_output, rk_marker;
  rk->add_option("--matrices", rk_matrices, "directory of matrix .txt files")->required();
  rk->add_option("--output", rk_output, "ranking TSV")->required();
  rk->add_option("--marker", rk_marker, "soft-boundary marker to strip (hybrid matrices)");

  // ---- grid ----
  auto* gr = app.add_subcommand("grid", "Run every language pair of a manifest");
  std::string gr_manifest;
  int gr_workers = 0;
  gr->add_option("--manifest", gr_manifest, "experiment manifest")->required();
  gr->add_option("--workers", gr_workers,
                 "parallel pair jobs (default: PHONSEG_WORKERS env var, else 1)");

  // ---- report ----
  auto* rp = app.add_subcommand("report", "Tabulate finished runs into grid TSVs");
  std::string rp_runs, rp_metric = "boundary_f", rp_matrix, rp_long;
  rp->add_option("--runs", rp_runs, "output_dir of a grid run")->required();
  rp->add_option("--metric", rp_metric, "cell metric of the matrix table");
  rp->add_option("--matrix", rp_matrix, "matrix TSV path")->required();
  rp->add_option("--long", rp_long, "long-form TSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sb) {
      ParallelCorpus corpus = load_with_inventory(sb_input, sb_inventory);
      const BayesHyperparams hp = hyperparams_for_corpus(corpus, sb_alpha0, sb_p_boundary);
      const BayesResult result =
          segment_corpus(corpus, hp, gibbs_config_from(sb_sweeps, sb_seed, sb_init_p));
      write_segmented(corpus, result.segmentations, sb_output);
      if (!sb_lexicon.empty()) {
        std::ofstream f(sb_lexicon);
        for (const auto& [word, count] : result.lexicon.counts)
          f << count << '\t' << join(word, "") << '\n';
      }
      if (!sb_log.empty()) {
        std::ofstream f(sb_log);
        f << "temperature\tsweeps\tjoint_log_prob\n";
        for (const auto& s : result.log) {
          char line[128];
          std::snprintf(line, sizeof(line), "%g\t%d\t%.17g\n", s.temperature, s.sweeps,
                        s.joint_log_prob);
          f << line;
        }
      }
    } else if (*tr) {
      ParallelCorpus corpus = load_with_inventory(tr_corpus, tr_inventory);
      auto [train_c, valid_c] = split_train_valid(corpus, tr_valid_fraction, tr_split_seed);
      std::vector<std::vector<std::string>> src_seqs, tgt_seqs;
      for (const auto& p : train_c.pairs) {
        src_seqs.push_back(p.source_tokens);
        tgt_seqs.push_back(p.target_phonemes);
      }
      const Vocab sv = build_vocab(src_seqs, tr_min_count);
      const Vocab tv = build_vocab(tgt_seqs, tr_min_count);
      Model<float> model;
      model.init(sv.size(), tv.size(), tr_mc);
      TrainConfig tc;
      tc.max_epochs = tr_epochs;
      tc.batch_size = tr_batch;
      tc.learning_rate = tr_lr;
      tc.patience = tr_patience;
      tc.seed = tr_seed;
      tc.verbose = true;
      const TrainResult result = train_model(model, encode_pairs(train_c, sv, tv),
                                             encode_pairs(valid_c, sv, tv), tc);
      save_model(model, sv, tv, tr_model);
      if (!tr_log.empty()) {
        std::ofstream f(tr_log);
        f << "epoch\ttrain_loss\tvalid_loss\n";
        for (const auto& e : result.log) {
          char line[128];
          std::snprintf(line, sizeof(line), "%d\t%.17g\t%.17g\n", e.epoch, e.train_loss,
                        e.valid_loss);
          f << line;
        }
      }
      std::fprintf(stderr, "best epoch %d, valid loss %.6f\n", result.best_epoch,
                   result.best_valid_loss);
    } else if (*sa) {
      ParallelCorpus corpus = load_with_inventory(sa_corpus, sa_inventory);
      std::vector<LoadedModel> models;
      for (const auto& path : sa_models) models.push_back(load_model(path));
      if (!sa_matrices.empty()) fs::create_directories(sa_matrices);
      std::vector<AlignedSegmentation> aligned;
      std::vector<SoftAlignmentMatrix> matrices;
      std::vector<Segmentation> segs;
      for (const auto& p : corpus.pairs) {
        std::vector<SoftAlignmentMatrix> per_model;
        for (const auto& lm : models)
          per_model.push_back(forced_decode_matrix(lm.model, lm.src_vocab, lm.tgt_vocab,
                                                   p.source_tokens, p.target_phonemes));
        SoftAlignmentMatrix avg = average_matrices(per_model);
        if (!sa_matrices.empty())
          save_matrix(avg, (fs::path(sa_matrices) / (p.id + ".txt")).string());
        aligned.push_back(attention_segment(avg));
        segs.push_back(aligned.back().segmentation);
        matrices.push_back(std::move(avg));
      }
      write_segmented(corpus, segs, sa_output);
      if (!sa_ranking.empty()) write_ranking(rank_alignments(aligned, matrices), sa_ranking);
    } else if (*sp) {
      ParallelCorpus corpus = load_with_inventory(sp_corpus, sp_inventory);
      std::vector<Segmentation> segs;
      for (const auto& p : corpus.pairs) {
        std::vector<int> lengths;
        for (const auto& tok : p.source_tokens)
          lengths.push_back(static_cast<int>(utf8_length(tok)));
        segs.push_back(proportional_segment(lengths, static_cast<int>(p.target_phonemes.size())));
      }
      write_segmented(corpus, segs, sp_output);
    } else if (*hy) {
      ParallelCorpus corpus = load_with_inventory(hy_corpus, hy_inventory);
      const BayesHyperparams hp = hyperparams_for_corpus(corpus, hy_alpha0, hy_p_boundary);
      const BayesResult bayes =
          segment_corpus(corpus, hp, gibbs_config_from(hy_sweeps, hy_gibbs_seed, hy_init_p));
      ParallelCorpus augmented = corpus;
      for (std::size_t i = 0; i < augmented.pairs.size(); ++i) {
        auto& p = augmented.pairs[i];
        p.target_phonemes = insert_soft_boundaries(p.target_phonemes, bayes.segmentations[i],
                                                   hy_marker);
        p.gold_boundaries.reset();
      }
      auto [train_c, valid_c] = split_train_valid(augmented, hy_valid_fraction, hy_split_seed);
      std::vector<std::vector<std::string>> src_seqs, tgt_seqs;
      for (const auto& p : train_c.pairs) {
        src_seqs.push_back(p.source_tokens);
        tgt_seqs.push_back(p.target_phonemes);
      }
      const Vocab sv = build_vocab(src_seqs);
      const Vocab tv = build_vocab(tgt_seqs);
      std::vector<std::vector<SoftAlignmentMatrix>> per_sentence(augmented.size());
      for (const std::uint64_t seed : hy_seeds) {
        Model<float> model;
        model.init(sv.size(), tv.size(), ModelConfig{});
        TrainConfig tc;
        tc.max_epochs = hy_epochs;
        tc.batch_size = hy_batch;
        tc.learning_rate = hy_lr;
        tc.patience = hy_patience;
        tc.seed = seed;
        tc.verbose = true;
        train_model(model, encode_pairs(train_c, sv, tv), encode_pairs(valid_c, sv, tv), tc);
        if (!hy_model_prefix.empty())
          save_model(model, sv, tv, hy_model_prefix + "seed" + std::to_string(seed) + ".bin");
        for (std::size_t i = 0; i < augmented.size(); ++i)
          per_sentence[i].push_back(forced_decode_matrix(model, sv, tv,
                                                         augmented.pairs[i].source_tokens,
                                                         augmented.pairs[i].target_phonemes));
      }
      if (!hy_matrices.empty()) fs::create_directories(hy_matrices);
      std::vector<AlignedSegmentation> aligned;
      std::vector<SoftAlignmentMatrix> matrices;
      std::vector<Segmentation> segs;
      for (std::size_t i = 0; i < augmented.size(); ++i) {
        SoftAlignmentMatrix avg = average_matrices(per_sentence[i]);
        if (!hy_matrices.empty())
          save_matrix(avg, (fs::path(hy_matrices) / (augmented.pairs[i].id + ".txt")).string());
        aligned.push_back(hybrid_segment(avg, hy_marker));
        segs.push_back(aligned.back().segmentation);
        matrices.push_back(std::move(avg));
      }
      write_segmented(corpus, segs, hy_output);
      if (!hy_ranking.empty()) write_ranking(rank_alignments(aligned, matrices), hy_ranking);
    } else if (*ev) {
      const ParallelCorpus gold_c = load_with_inventory(ev_gold, ev_inventory);
      const ParallelCorpus hyp_c = load_with_inventory(ev_hyp, ev_inventory);
      if (ev_output.empty()) {
        print_eval(std::cout, gold_c, hyp_c);
      } else {
        std::ofstream f(ev_output);
        if (!f) throw std::runtime_error("cannot write " + ev_output);
        print_eval(f, gold_c, hyp_c);
      }
    } else if (*rk) {
      std::vector<AlignedSegmentation> aligned;
      std::vector<SoftAlignmentMatrix> matrices;
      for (const auto& file : matrix_files(rk_matrices)) {
        LoadedMatrix lm = load_matrix(file.string());
        aligned.push_back(rk_marker.empty() ? attention_segment(lm.matrix)
                                            : hybrid_segment(lm.matrix, rk_marker));
        matrices.push_back(std::move(lm.matrix));
      }
      write_ranking(rank_alignments(aligned, matrices), rk_output);
    } else if (*gr) {
      const ExperimentManifest manifest = ExperimentManifest::load(gr_manifest);
      const std::vector<RunReport> reports = run_grid(manifest, gr_workers);
      int failures = 0;
      for (const auto& r : reports)
        if (!r.ok) ++failures;
      std::fprintf(stderr, "[grid] %zu pairs, %d failed\n", reports.size(), failures);
      return failures == 0 ? 0 : 1;
    } else if (*rp) {
      const std::vector<RunReport> reports = collect_reports(rp_runs);
      emit_grid_report(reports, rp_metric, rp_matrix, rp_long);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
