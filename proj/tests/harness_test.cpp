#include "phonseg/harness.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "phonseg/rng.hpp"
#include "phonseg/soft_alignment.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace phonseg;
using phonseg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Two toy language files sharing ids: lang B carries the bilingual gold
// segmentation, lang A re-serves the word tokens as its own sentence.
void write_language_files(const TempDir& tmp, int sentences, std::uint64_t seed) {
  ParallelCorpus bilingual = synth::make_bilingual_corpus(sentences, seed);
  write_corpus(bilingual, tmp.str("langB.tsv"));
  ParallelCorpus source_side;
  for (const auto& p : bilingual.pairs) {
    UtterancePair q;
    q.id = p.id;
    q.source_tokens = p.source_tokens;
    q.target_phonemes = {"x"};
    q.gold_boundaries = Segmentation({}, 1);
    source_side.pairs.push_back(std::move(q));
  }
  write_corpus(source_side, tmp.str("langA.tsv"));
}

ExperimentManifest toy_manifest(const TempDir& tmp, const std::string& mode) {
  ExperimentManifest m;
  m.languages = {{"A", tmp.str("langA.tsv")}, {"B", tmp.str("langB.tsv")}};
  m.mode = mode;
  m.output_dir = tmp.str("runs");
  m.overrides["valid_fraction"] = "0.2";
  return m;
}

SoftAlignmentMatrix random_stochastic(int t_len, int a_len, std::uint64_t seed) {
  Rng rng(seed);
  SoftAlignmentMatrix m;
  m.weights.resize(t_len, a_len);
  for (int t = 0; t < t_len; ++t) {
    double s = 0.0;
    for (int i = 0; i < a_len; ++i) s += (m.weights(t, i) = rng.uniform(0.01, 1.0));
    m.weights.row(t) /= s;
  }
  for (int i = 0; i < a_len; ++i) m.source_tokens.push_back("src" + std::to_string(i));
  for (int t = 0; t < t_len; ++t) m.target_symbols.push_back("t" + std::to_string(t));
  return m;
}

}  // namespace

TEST_CASE("soft-alignment matrices round-trip bit-exactly through text") {
  TempDir tmp("matrix");
  auto m = random_stochastic(5, 3, 77);
  m.validate();
  save_matrix(m, tmp.str("m.txt"));
  auto loaded = load_matrix(tmp.str("m.txt"));
  CHECK(loaded.invalid_rows.empty());
  CHECK((loaded.matrix.weights == m.weights));  // bitwise, via 17 significant digits
  CHECK(loaded.matrix.source_tokens == m.source_tokens);
  CHECK(loaded.matrix.target_symbols == m.target_symbols);
}

TEST_CASE("load_matrix rejects malformed files") {
  TempDir tmp("matrix");
  write_file(tmp.str("short.txt"), "3 2\n0.5 0.5\n0.5 0.5\ns1 s2\n t1 t2 t3\n");
  CHECK_THROWS_AS(load_matrix(tmp.str("short.txt")), std::runtime_error);
  write_file(tmp.str("junk.txt"), "x y\n");
  CHECK_THROWS_AS(load_matrix(tmp.str("junk.txt")), std::runtime_error);
  CHECK_THROWS_AS(load_matrix(tmp.str("absent.txt")), std::runtime_error);
}

TEST_CASE("load_matrix flags rows that are not distributions") {
  TempDir tmp("matrix");
  write_file(tmp.str("bad.txt"), "2 2\n0.5 0.5\n0.5 0.3\ns1 s2\nt1 t2\n");
  auto loaded = load_matrix(tmp.str("bad.txt"));
  REQUIRE(loaded.invalid_rows.size() == 1);
  CHECK(loaded.invalid_rows[0] == 1);
  CHECK_THROWS_AS(loaded.matrix.validate(), std::invalid_argument);
}

TEST_CASE("manifest parsing reads every directive") {
  TempDir tmp("manifest");
  write_file(tmp.str("a.tsv"), "u1\tw\tx\nu2\tw\ty\n");
  write_file(tmp.str("b.tsv"), "u1\tw\tx\nu2\tw\ty\n");
  write_file(tmp.str("m.txt"),
             "# comment\n"
             "language A " + tmp.str("a.tsv") + "\n"
             "language B " + tmp.str("b.tsv") + "\n\n"
             "pivot A\n"
             "pair A B\n"
             "mode proportional\n"
             "seed 5\nseed 6\n"
             "output_dir " + tmp.str("out") + "\n"
             "set gibbs.sweeps 50\n");
  auto m = ExperimentManifest::load(tmp.str("m.txt"));
  REQUIRE(m.languages.size() == 2);
  CHECK(m.languages[0].first == "A");
  CHECK(m.language_path("B") == tmp.str("b.tsv"));
  CHECK(m.pivot == "A");
  CHECK(m.pairs == std::vector<std::pair<std::string, std::string>>{{"A", "B"}});
  CHECK(m.mode == "proportional");
  CHECK(m.seeds == std::vector<std::uint64_t>{5, 6});
  CHECK(m.output_dir == tmp.str("out"));
  CHECK(m.overrides.at("gibbs.sweeps") == "50");
  CHECK(m.grid_pairs().size() == 1);
}

TEST_CASE("manifest validation rejects inconsistent declarations") {
  ExperimentManifest m;
  m.languages = {{"A", "a.tsv"}, {"B", "b.tsv"}};

  auto expect_error = [](ExperimentManifest bad, const std::string& needle) {
    try {
      bad.validate();
      FAIL_CHECK("expected validate() to throw for " << needle);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  ExperimentManifest dup = m;
  dup.languages.push_back({"A", "again.tsv"});
  expect_error(dup, "twice");

  ExperimentManifest bad_mode = m;
  bad_mode.mode = "psychic";
  expect_error(bad_mode, "bayes");  // message lists the valid modes

  ExperimentManifest bad_pair = m;
  bad_pair.pairs = {{"A", "Z"}};
  expect_error(bad_pair, "undeclared");

  ExperimentManifest self_pair = m;
  self_pair.pairs = {{"A", "A"}};
  expect_error(self_pair, "not bilingual");

  ExperimentManifest bad_pivot = m;
  bad_pivot.pivot = "Q";
  expect_error(bad_pivot, "pivot");

  ExperimentManifest lonely;
  lonely.languages = {{"A", "a.tsv"}};
  expect_error(lonely, "at least 2");

  ExperimentManifest bad_key = m;
  bad_key.overrides["no_such_knob"] = "1";
  expect_error(bad_key, "valid keys");

  m.validate();  // the base manifest itself is fine
}

TEST_CASE("manifest default grid is every ordered non-self pair") {
  ExperimentManifest m;
  m.languages = {{"A", "a"}, {"B", "b"}, {"C", "c"}};
  auto pairs = m.grid_pairs();
  REQUIRE(pairs.size() == 6);
  for (const auto& [s, t] : pairs) CHECK(s != t);
  CHECK(m.effective_seeds() == std::vector<std::uint64_t>{1, 2});
  m.seeds = {9};
  CHECK(m.effective_seeds() == std::vector<std::uint64_t>{9});
}

TEST_CASE("reports serialize to stable text and parse back") {
  RunReport r;
  r.pair_id = "A-B";
  r.source = "A";
  r.target = "B";
  r.mode = "neural";
  r.seeds = {1, 2};
  r.ok = true;
  r.error = "tab\there\nnewline";
  r.sentences = 12;
  r.train_sentences = 10;
  r.valid_sentences = 2;
  r.has_gold = true;
  r.boundary_p = 1.0 / 3.0;
  r.boundary_r = 0.1;
  r.boundary_f = 2.0 / 7.0;
  r.type_p = 0.25;
  r.type_r = 0.75;
  r.type_f = 0.375;
  r.discovered_types = 42;
  r.mean_token_length = 3.625;
  r.bleu = 66.87;

  const std::string text = serialize_report(r);
  auto back = parse_report(text);
  CHECK(back.pair_id == r.pair_id);
  CHECK(back.seeds == r.seeds);
  CHECK(back.ok == r.ok);
  CHECK(back.error == "tab here newline");  // sanitized
  CHECK(back.boundary_p == r.boundary_p);   // %.17g round-trips doubles exactly
  CHECK(back.boundary_f == r.boundary_f);
  CHECK(back.mean_token_length == r.mean_token_length);
  CHECK(back.bleu == r.bleu);
  CHECK(serialize_report(back).find("wall") == std::string::npos);
  CHECK_THROWS_AS(parse_report("pair\tA-B\n"), std::runtime_error);  // missing keys
}

TEST_CASE("proportional run_pair persists a deterministic report") {
  TempDir tmp("prop");
  write_language_files(tmp, 12, 5);
  auto m = toy_manifest(tmp, "proportional");

  auto report = run_pair(m, "A", "B", "proportional");
  REQUIRE(report.ok);
  CHECK(report.pair_id == "A-B");
  CHECK(report.sentences == 12);
  CHECK(report.train_sentences + report.valid_sentences == 12);
  CHECK(report.has_gold);
  CHECK(report.boundary_f > 0.0);
  CHECK(report.boundary_f <= 1.0);
  CHECK(report.seeds.empty());  // no stochastic stage
  CHECK(report.bleu == 0.0);    // no decoder in this mode

  // exactly one run directory with the standard artifacts
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(tmp.str("runs"))) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  CHECK(fs::exists(dirs[0] / "report.tsv"));
  CHECK(fs::exists(dirs[0] / "segmentation.tsv"));
  CHECK(fs::exists(dirs[0] / "timing.tsv"));
  CHECK(!fs::exists(dirs[0] / "failure.tsv"));

  // segmentation output re-parses against the same ids
  auto segged = load_corpus((dirs[0] / "segmentation.tsv").string(), "A", "B");
  CHECK(segged.size() == 12);

  // resume: same report bytes, no recomputation (sentinel survives)
  const std::string before = read_file((dirs[0] / "report.tsv").string());
  write_file((dirs[0] / "sentinel").string(), "untouched");
  auto resumed = run_pair(m, "A", "B", "proportional");
  CHECK(resumed.ok);
  CHECK(serialize_report(resumed) == serialize_report(report));
  CHECK(read_file((dirs[0] / "report.tsv").string()) == before);
  CHECK(read_file((dirs[0] / "sentinel").string()) == "untouched");
}

TEST_CASE("bayes run_pair writes sampler artifacts") {
  TempDir tmp("bayes");
  write_language_files(tmp, 12, 6);
  auto m = toy_manifest(tmp, "bayes");
  m.overrides["gibbs.sweeps"] = "20";

  auto report = run_pair(m, "A", "B", "bayes");
  REQUIRE(report.ok);
  CHECK(report.seeds == std::vector<std::uint64_t>{1});
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(tmp.str("runs"))) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  CHECK(fs::exists(dirs[0] / "gibbs-log.tsv"));
  CHECK(fs::exists(dirs[0] / "lexicon.tsv"));
  // four annealing stages -> header + 4 rows
  const std::string log = read_file((dirs[0] / "gibbs-log.tsv").string());
  CHECK(std::count(log.begin(), log.end(), '\n') == 5);
}

TEST_CASE("failed pairs leave a failure record and no report") {
  TempDir tmp("fail");
  write_language_files(tmp, 12, 7);
  auto m = toy_manifest(tmp, "proportional");
  m.languages[0].second = tmp.str("does-not-exist.tsv");

  auto report = run_pair(m, "A", "B", "proportional");
  CHECK(!report.ok);
  CHECK(!report.error.empty());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(tmp.str("runs"))) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  CHECK(fs::exists(dirs[0] / "failure.tsv"));
  CHECK(!fs::exists(dirs[0] / "report.tsv"));
  CHECK(collect_reports(tmp.str("runs")).empty());

  // fixing the manifest retries the pair instead of trusting the stale dir
  m.languages[0].second = tmp.str("langA.tsv");
  auto retried = run_pair(m, "A", "B", "proportional");
  CHECK(retried.ok);
}

TEST_CASE("run_grid covers both directions and feeds the report tables") {
  TempDir tmp("grid");
  write_language_files(tmp, 12, 8);
  auto m = toy_manifest(tmp, "proportional");

  auto reports = run_grid(m, 2);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].ok);
  CHECK(reports[1].ok);
  CHECK(reports[0].pair_id == "A-B");
  CHECK(reports[1].pair_id == "B-A");

  emit_grid_report(reports, "boundary_f", tmp.str("matrix.tsv"), tmp.str("long.tsv"));
  const std::string matrix = read_file(tmp.str("matrix.tsv"));
  // header + one row per source language
  CHECK(matrix.rfind("source\\target\tB\tA", 0) == 0);
  CHECK(std::count(matrix.begin(), matrix.end(), '\n') == 3);

  const std::string longform = read_file(tmp.str("long.tsv"));
  CHECK(std::count(longform.begin(), longform.end(), '\n') == 3);
  CHECK(longform.find("boundary_f") != std::string::npos);

  CHECK_THROWS_WITH_AS(
      emit_grid_report(reports, "nope", tmp.str("x.tsv"), tmp.str("y.tsv")),
      doctest::Contains("valid metrics"), std::runtime_error);

  auto collected = collect_reports(tmp.str("runs"));
  REQUIRE(collected.size() == 2);
  CHECK(collected[0].ok);
  CHECK(collected[1].ok);
}

TEST_CASE("neural run with duplicated seed equals the single-seed run") {
  TempDir tmp("dupseed");
  write_language_files(tmp, 12, 9);
  auto base = toy_manifest(tmp, "neural");
  base.overrides["train.max_epochs"] = "2";
  base.overrides["model.src_embed"] = "8";
  base.overrides["model.enc_hidden"] = "8";
  base.overrides["model.tgt_embed"] = "8";
  base.overrides["model.dec_hidden"] = "8";
  base.overrides["model.attn_hidden"] = "8";

  auto single = base;
  single.seeds = {7};
  single.output_dir = tmp.str("runs-single");
  auto doubled = base;
  doubled.seeds = {7, 7};
  doubled.output_dir = tmp.str("runs-doubled");

  auto r1 = run_pair(single, "A", "B", "neural");
  auto r2 = run_pair(doubled, "A", "B", "neural");
  REQUIRE(r1.ok);
  REQUIRE(r2.ok);
  CHECK(r1.boundary_p == r2.boundary_p);
  CHECK(r1.boundary_r == r2.boundary_r);
  CHECK(r1.boundary_f == r2.boundary_f);
  CHECK(r1.type_f == r2.type_f);
  CHECK(r1.bleu == r2.bleu);
  CHECK(r1.discovered_types == r2.discovered_types);
}
