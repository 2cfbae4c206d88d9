#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phonseg/corpus.hpp"

namespace phonseg {

// Declarative experiment description, one directive per line, fields
// whitespace-separated (so paths must not contain whitespace):
//   language <name> <corpus.tsv>     (repeatable, order = grid order)
//   pivot <name>                     (optional sentence-length filter)
//   pair <source> <target>           (repeatable; none = all ordered pairs)
//   mode bayes|neural|hybrid|proportional
//   seed <n>                         (repeatable; default 1 2)
//   output_dir <path>
//   inventory <path>                 (optional phoneme inventory)
//   set <key> <value>                (hyperparameter override, repeatable)
// Blank lines and lines starting with # are skipped.
struct ExperimentManifest {
  std::vector<std::pair<std::string, std::string>> languages;  // name -> corpus path
  std::string pivot;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string mode = "neural";
  std::vector<std::uint64_t> seeds;                            // empty -> {1, 2}
  std::string output_dir = "runs";
  std::string inventory_path;
  std::map<std::string, std::string> overrides;

  static ExperimentManifest load(const std::string& path);
  void validate() const;
  const std::string& language_path(const std::string& name) const;
  std::vector<std::pair<std::string, std::string>> grid_pairs() const;
  std::vector<std::uint64_t> effective_seeds() const;
};

// Recognized `set` keys (unknown keys are rejected on validate):
//   valid_fraction split_seed max_pivot_tokens marker min_count max_decode_factor
//   gibbs.sweeps gibbs.alpha0 gibbs.p_boundary gibbs.init_boundary_prob gibbs.seed
//   train.max_epochs train.batch_size train.learning_rate train.patience
//   model.src_embed model.enc_hidden model.tgt_embed model.dec_hidden model.attn_hidden
const std::vector<std::string>& manifest_override_keys();

struct RunReport {
  std::string pair_id;  // "<source>-<target>"
  std::string source, target;
  std::string mode;
  std::vector<std::uint64_t> seeds;
  bool ok = false;
  std::string error;

  long sentences = 0, train_sentences = 0, valid_sentences = 0;
  bool has_gold = false;
  double boundary_p = 0, boundary_r = 0, boundary_f = 0;
  double type_p = 0, type_r = 0, type_f = 0;
  long discovered_types = 0;
  double mean_token_length = 0;
  double bleu = 0;

  double wall_seconds = 0;  // sidecar only, never part of report.tsv
};

// Flat key<TAB>value lines, fixed key order, floats at 17 significant
// digits; byte-identical across reruns of the same configuration.
std::string serialize_report(const RunReport& report);
RunReport parse_report(const std::string& text);

// Runs one (source, target) experiment and persists all artifacts under
//   <output_dir>/<source>-<target>_<mode>_s<seeds>_<confighash>/
// (report.tsv, segmentation.tsv, timing.tsv, plus per-mode extras). A
// finished directory (report.tsv present) is loaded instead of recomputed.
// Failures are caught, recorded in failure.tsv, and returned with ok=false.
RunReport run_pair(const ExperimentManifest& manifest, const std::string& source,
                   const std::string& target, const std::string& mode);

// Every grid pair in manifest order; worker count from `workers` if > 0,
// else the PHONSEG_WORKERS environment variable, else 1.
std::vector<RunReport> run_grid(const ExperimentManifest& manifest, int workers = 0);

// Matrix TSV (rows = source language, columns = target, diagonal empty) plus
// a long-form TSV with one row per pair. Unknown metric names raise an error
// listing the valid ones.
void emit_grid_report(const std::vector<RunReport>& reports, const std::string& metric,
                      const std::string& matrix_path, const std::string& long_path);

const std::vector<std::string>& grid_metric_names();

// All */report.tsv under a run directory, sorted by directory name.
std::vector<RunReport> collect_reports(const std::string& output_dir);

}  // namespace phonseg
