#include "phonseg/metrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "phonseg/rng.hpp"

using namespace phonseg;

namespace {

// n-gram precision oracle built independently of the library's counting.
double oracle_bleu4(const std::vector<std::vector<std::string>>& hyps,
                    const std::vector<std::vector<std::string>>& refs) {
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    long matched = 0, total = 0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
      std::map<std::vector<std::string>, long> ref_counts, hyp_counts;
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i)
        ++ref_counts[{refs[s].begin() + i, refs[s].begin() + i + n}];
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i)
        ++hyp_counts[{hyps[s].begin() + i, hyps[s].begin() + i + n}];
      for (const auto& [gram, c] : hyp_counts) {
        total += c;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched += std::min(c, it->second);
      }
    }
    if (matched == 0) return 0.0;
    log_sum += 0.25 * std::log(static_cast<double>(matched) / total);
  }
  long hyp_len = 0, ref_len = 0;
  for (const auto& h : hyps) hyp_len += h.size();
  for (const auto& r : refs) ref_len += r.size();
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return 100.0 * bp * std::exp(log_sum);
}

std::vector<std::string> toks(const std::string& spaced) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : spaced) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("boundary_prf on the hand-counted example") {
  const Segmentation gold({2, 3}, 5), hyp({2}, 5);
  // oracle: count the intersection directly
  std::set<int> g(gold.boundaries.begin(), gold.boundaries.end());
  std::set<int> h(hyp.boundaries.begin(), hyp.boundaries.end());
  long correct = 0;
  for (int b : h) correct += g.count(b);
  REQUIRE(correct == 1);

  auto score = boundary_prf(gold, hyp);
  CHECK(score.correct == correct);
  CHECK(score.proposed == 1);
  CHECK(score.gold == 2);
  CHECK(score.precision == doctest::Approx(1.0));
  CHECK(score.recall == doctest::Approx(0.5));
  CHECK(score.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("boundary_prf degenerate and identity cases") {
  const Segmentation gold({2, 3}, 5);
  auto perfect = boundary_prf(gold, gold);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  auto empty = boundary_prf(gold, Segmentation({}, 5));
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  auto both_empty = boundary_prf(Segmentation({}, 5), Segmentation({}, 5));
  CHECK(both_empty.f1 == 0.0);  // no boundaries to score

  CHECK_THROWS_AS(boundary_prf(Segmentation({}, 5), Segmentation({}, 6)),
                  std::invalid_argument);
}

TEST_CASE("boundary_prf swaps precision and recall when gold and hyp swap") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int len = 2 + static_cast<int>(rng.uniform_int(10));
    auto draw = [&]() {
      std::vector<int> bs;
      for (int b = 1; b < len; ++b)
        if (rng.uniform01() < 0.5) bs.push_back(b);
      return Segmentation(bs, len);
    };
    auto a = draw(), b = draw();
    auto ab = boundary_prf(a, b), ba = boundary_prf(b, a);
    CHECK(ab.precision == doctest::Approx(ba.recall));
    CHECK(ab.recall == doctest::Approx(ba.precision));
    CHECK(ab.f1 == doctest::Approx(ba.f1));
  }
}

TEST_CASE("corpus boundary_prf sums counts across utterances") {
  std::vector<Segmentation> gold = {Segmentation({2, 3}, 5), Segmentation({1}, 3)};
  std::vector<Segmentation> hyp = {Segmentation({2}, 5), Segmentation({2}, 3)};
  auto score = boundary_prf(gold, hyp);
  CHECK(score.correct == 1);
  CHECK(score.proposed == 2);
  CHECK(score.gold == 3);
  CHECK(score.precision == doctest::Approx(0.5));
  CHECK(score.recall == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(boundary_prf(gold, std::vector<Segmentation>{hyp[0]}),
                  std::invalid_argument);
}

TEST_CASE("type_metrics counts distinct span strings") {
  // hyp types {ab, c}; gold types {ab, cc}; correct {ab}
  std::vector<std::vector<std::string>> seqs = {{"a", "b"}, {"c", "c"}};
  std::vector<Segmentation> gold = {Segmentation({}, 2), Segmentation({}, 2)};
  std::vector<Segmentation> hyp = {Segmentation({}, 2), Segmentation({1}, 2)};

  CHECK(segmentation_types(seqs, gold) == std::set<std::string>{"ab", "cc"});
  CHECK(segmentation_types(seqs, hyp) == std::set<std::string>{"ab", "c"});

  auto score = type_metrics(seqs, gold, hyp);
  CHECK(score.correct == std::set<std::string>{"ab"});
  CHECK(score.hyp_types == 2);
  CHECK(score.gold_types == 2);
  CHECK(score.precision == doctest::Approx(0.5));
  CHECK(score.recall == doctest::Approx(0.5));
  CHECK(score.f1 == doctest::Approx(0.5));

  auto perfect = type_metrics(seqs, gold, gold);
  CHECK(perfect.f1 == doctest::Approx(1.0));
}

TEST_CASE("bleu4 trivial endpoints") {
  std::vector<std::vector<std::string>> x = {toks("a b c d e"), toks("f g h i")};
  CHECK(bleu4(x, x) == doctest::Approx(100.0));
  std::vector<std::vector<std::string>> disjoint = {toks("p q r s t"), toks("u v w x")};
  CHECK(bleu4(disjoint, x) == 0.0);
  CHECK_THROWS_AS(bleu4({}, {}), std::invalid_argument);
}

TEST_CASE("bleu4 matches the hand-evaluated modified precisions") {
  std::vector<std::vector<std::string>> hyp = {toks("a b c d e")};
  std::vector<std::vector<std::string>> ref = {toks("a b c d f")};
  const double expected = 100.0 * std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
  const double got = bleu4(hyp, ref);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(got - 66.9) < 0.1);
  CHECK(got == doctest::Approx(oracle_bleu4(hyp, ref)).epsilon(1e-12));
}

TEST_CASE("bleu4 clips repeated n-grams against the reference") {
  std::vector<std::vector<std::string>> hyp = {toks("the the the the")};
  std::vector<std::vector<std::string>> ref = {toks("the cat sat down")};
  // p1 clipped to 1/4; higher-order matches are zero -> score 0
  CHECK(bleu4(hyp, ref) == 0.0);
  CHECK(oracle_bleu4(hyp, ref) == 0.0);
}

TEST_CASE("bleu4 applies the brevity penalty for short hypotheses") {
  std::vector<std::vector<std::string>> hyp = {toks("a b c d")};
  std::vector<std::vector<std::string>> ref = {toks("a b c d e")};
  const double expected = 100.0 * std::exp(1.0 - 5.0 / 4.0);
  CHECK(bleu4(hyp, ref) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bleu4(hyp, ref) == doctest::Approx(oracle_bleu4(hyp, ref)).epsilon(1e-12));
}

TEST_CASE("bleu4 pools counts at corpus level, not per sentence") {
  std::vector<std::vector<std::string>> hyp = {toks("a b c d e f g h i"), toks("y z")};
  std::vector<std::vector<std::string>> ref = {toks("a b c d e f g h i"), toks("p q")};
  const double got = bleu4(hyp, ref);
  CHECK(got == doctest::Approx(oracle_bleu4(hyp, ref)).epsilon(1e-12));
  // mean of the two sentence scores would be 50; pooling gives much more
  CHECK(got > 80.0);
  CHECK(got < 100.0);
}

TEST_CASE("bleu4 agrees with the oracle on random corpora") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<std::string>> hyp, ref;
    const int sentences = 1 + static_cast<int>(rng.uniform_int(4));
    for (int s = 0; s < sentences; ++s) {
      auto draw = [&]() {
        std::vector<std::string> t;
        const int len = 4 + static_cast<int>(rng.uniform_int(8));
        for (int i = 0; i < len; ++i) t.push_back(std::string(1, 'a' + rng.uniform_int(5)));
        return t;
      };
      hyp.push_back(draw());
      ref.push_back(draw());
    }
    CHECK(bleu4(hyp, ref) == doctest::Approx(oracle_bleu4(hyp, ref)).epsilon(1e-10));
  }
}

TEST_CASE("incomplete_beta matches closed forms") {
  // I_x(1,1) = x
  for (double x : {0.0, 0.25, 0.5, 0.9, 1.0})
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
  // I_x(0.5,0.5) = (2/pi) asin(sqrt(x))
  for (double x : {0.1, 0.3, 0.5, 0.7, 0.99})
    CHECK(incomplete_beta(0.5, 0.5, x) ==
          doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-10));
  // I_x(a,1) = x^a and I_x(1,b) = 1-(1-x)^b
  for (double x : {0.2, 0.6, 0.95}) {
    CHECK(incomplete_beta(3.0, 1.0, x) == doctest::Approx(std::pow(x, 3.0)).epsilon(1e-10));
    CHECK(incomplete_beta(1.0, 2.5, x) ==
          doctest::Approx(1.0 - std::pow(1.0 - x, 2.5)).epsilon(1e-10));
  }
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
  CHECK(incomplete_beta(2.0, 3.5, 0.3) ==
        doctest::Approx(1.0 - incomplete_beta(3.5, 2.0, 0.7)).epsilon(1e-10));
}

TEST_CASE("pearson_r on exact linear relationships") {
  std::vector<double> xs = {1, 2, 3, 4, 5};
  std::vector<double> up, down;
  for (double x : xs) {
    up.push_back(2.0 * x + 1.0);
    down.push_back(-x);
  }
  CHECK(std::abs(pearson_r(xs, up).r - 1.0) < 1e-12);
  CHECK(std::abs(pearson_r(xs, down).r + 1.0) < 1e-12);

  std::vector<double> flat = {3, 3, 3, 3, 3};
  CHECK_THROWS_AS(pearson_r(xs, flat), std::invalid_argument);
  std::vector<double> two_x = {1, 2}, two_y = {3, 4};
  CHECK_THROWS_AS(pearson_r(two_x, two_y), std::invalid_argument);  // N < 3
}

TEST_CASE("pearson_r p-value matches the closed-form t CDF at two dof") {
  // N=4 -> nu=2, where P(|T| > t) = 1 - t/sqrt(2+t^2) exactly
  std::vector<double> xs = {1, 2, 3, 4};
  std::vector<double> ys = {1, 2, 3, 5};
  // direct textbook formula for r
  double mx = 0, my = 0;
  for (int i = 0; i < 4; ++i) mx += xs[i] / 4, my += ys[i] / 4;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r = sxy / std::sqrt(sxx * syy);
  const double t = r * std::sqrt(2.0 / (1.0 - r * r));
  const double expected_p = 1.0 - t / std::sqrt(2.0 + t * t);

  auto corr = pearson_r(xs, ys);
  CHECK(corr.r == doctest::Approx(r).epsilon(1e-12));
  CHECK(corr.p_value == doctest::Approx(expected_p).epsilon(1e-9));
}

TEST_CASE("pearson_r is invariant under positive affine transforms") {
  Rng rng(5);
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(rng.uniform(-3, 3));
    ys.push_back(rng.uniform(-3, 3));
  }
  auto base = pearson_r(xs, ys);
  std::vector<double> scaled;
  for (double x : xs) scaled.push_back(2.5 * x + 7.0);
  auto moved = pearson_r(scaled, ys);
  CHECK(std::abs(base.r - moved.r) < 1e-9);
  CHECK(std::abs(base.p_value - moved.p_value) < 1e-9);
}

TEST_CASE("mean_token_length averages span lengths over all tokens") {
  CHECK(mean_token_length({Segmentation({2}, 6)}) == doctest::Approx(3.0));
  CHECK(mean_token_length({Segmentation({}, 7)}) == doctest::Approx(7.0));
  // corpus-level: spans 2,4 and 7 -> (2+4+7)/3
  CHECK(mean_token_length({Segmentation({2}, 6), Segmentation({}, 7)}) ==
        doctest::Approx(13.0 / 3.0));
}
