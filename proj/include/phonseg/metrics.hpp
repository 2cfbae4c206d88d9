#pragma once

#include <set>
#include <string>
#include <vector>

#include "phonseg/segmentation.hpp"

namespace phonseg {

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long proposed = 0;
  long gold = 0;
  long correct = 0;
};

// Interior boundaries only; utterance edges never count.
BoundaryScore boundary_prf(const Segmentation& gold, const Segmentation& hyp);

// Corpus score by summing counts, then P/R/F from the sums.
BoundaryScore boundary_prf(const std::vector<Segmentation>& gold,
                           const std::vector<Segmentation>& hyp);

struct TypeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::set<std::string> correct;   // hyp types present in gold
  std::size_t hyp_types = 0;
  std::size_t gold_types = 0;
};

// Types are distinct span strings (phonemes of a span joined).
std::set<std::string> segmentation_types(const std::vector<std::vector<std::string>>& sequences,
                                         const std::vector<Segmentation>& segs);

TypeScore type_metrics(const std::vector<std::vector<std::string>>& sequences,
                       const std::vector<Segmentation>& gold,
                       const std::vector<Segmentation>& hyp);

// Corpus-level BLEU-4: geometric mean of modified 1..4-gram precisions times
// the brevity penalty, in [0, 100]. No smoothing.
double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;  // two-tailed, from the t statistic with N-2 dof
};

Correlation pearson_r(const std::vector<double>& xs, const std::vector<double>& ys);

double mean_token_length(const std::vector<Segmentation>& segs);

// Regularized incomplete beta I_x(a, b); exposed because the t-distribution
// tail needs it and tests pin it against quadrature.
double incomplete_beta(double a, double b, double x);

}  // namespace phonseg
