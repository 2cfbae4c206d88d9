#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace phonseg {

// Attention rows harvested during forced decoding: row t is the probability
// distribution over source tokens while emitting target symbol t.
struct SoftAlignmentMatrix {
  Eigen::MatrixXd weights;                  // T x A, rows sum to 1
  std::vector<std::string> source_tokens;   // A
  std::vector<std::string> target_symbols;  // T

  Eigen::Index target_len() const { return weights.rows(); }
  Eigen::Index source_len() const { return weights.cols(); }

  // throws if shapes disagree or any row is not a distribution within tol
  void validate(double tol = 1e-5) const;
};

// Entrywise mean over matrices of one sentence pair; rows stay stochastic.
SoftAlignmentMatrix average_matrices(const std::vector<SoftAlignmentMatrix>& matrices);

// Text format, bit-exact round trip:
//   line 1: "T A"
//   T lines: A decimal floats, 17 significant digits, space-separated
//   one line of source tokens, one line of target symbols
void save_matrix(const SoftAlignmentMatrix& m, const std::string& path);

struct LoadedMatrix {
  SoftAlignmentMatrix matrix;
  std::vector<Eigen::Index> invalid_rows;  // rows whose sum strays beyond 1e-5
};

LoadedMatrix load_matrix(const std::string& path);

}  // namespace phonseg
