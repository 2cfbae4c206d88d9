#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "phonseg/soft_alignment.hpp"
#include "phonseg/text.hpp"

namespace phonseg {

void SoftAlignmentMatrix::validate(double tol) const {
  if (weights.rows() != static_cast<Eigen::Index>(target_symbols.size()))
    throw std::invalid_argument("soft alignment: row count != target length");
  if (weights.cols() != static_cast<Eigen::Index>(source_tokens.size()))
    throw std::invalid_argument("soft alignment: column count != source length");
  for (Eigen::Index t = 0; t < weights.rows(); ++t) {
    if ((weights.row(t).array() < 0.0).any())
      throw std::invalid_argument("soft alignment: negative weight in row " + std::to_string(t));
    double sum = weights.row(t).sum();
    if (std::fabs(sum - 1.0) > tol)
      throw std::invalid_argument("soft alignment: row " + std::to_string(t) + " sums to " +
                                  std::to_string(sum));
  }
}

SoftAlignmentMatrix average_matrices(const std::vector<SoftAlignmentMatrix>& matrices) {
  if (matrices.empty()) throw std::invalid_argument("average_matrices: empty input");
  SoftAlignmentMatrix out = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    const auto& m = matrices[i];
    if (m.weights.rows() != out.weights.rows() || m.weights.cols() != out.weights.cols())
      throw std::invalid_argument("average_matrices: shape mismatch");
    if (m.source_tokens != out.source_tokens || m.target_symbols != out.target_symbols)
      throw std::invalid_argument("average_matrices: matrices describe different sentence pairs");
    out.weights += m.weights;
  }
  out.weights /= static_cast<double>(matrices.size());
  return out;
}

void save_matrix(const SoftAlignmentMatrix& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "%lld %lld\n", static_cast<long long>(m.target_len()),
               static_cast<long long>(m.source_len()));
  for (Eigen::Index t = 0; t < m.target_len(); ++t) {
    for (Eigen::Index a = 0; a < m.source_len(); ++a)
      std::fprintf(f, a ? " %.17g" : "%.17g", m.weights(t, a));
    std::fputc('\n', f);
  }
  std::fprintf(f, "%s\n%s\n", join(m.source_tokens, " ").c_str(),
               join(m.target_symbols, " ").c_str());
  std::fclose(f);
}

LoadedMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
  long long t_len = 0, a_len = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> t_len >> a_len) || t_len < 0 || a_len <= 0)
      throw std::runtime_error(path + ": malformed header '" + line + "'");
  }
  LoadedMatrix out;
  out.matrix.weights.resize(t_len, a_len);
  for (long long t = 0; t < t_len; ++t) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + ": expected " + std::to_string(t_len) +
                               " data rows, found " + std::to_string(t));
    std::istringstream rs(line);
    for (long long a = 0; a < a_len; ++a)
      if (!(rs >> out.matrix.weights(t, a)))
        throw std::runtime_error(path + ": short data row " + std::to_string(t + 1));
    double extra;
    if (rs >> extra) throw std::runtime_error(path + ": oversized data row " + std::to_string(t + 1));
  }
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing source token line");
  out.matrix.source_tokens = split_whitespace(line);
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing target symbol line");
  out.matrix.target_symbols = split_whitespace(line);
  if (static_cast<long long>(out.matrix.source_tokens.size()) != a_len ||
      static_cast<long long>(out.matrix.target_symbols.size()) != t_len)
    throw std::runtime_error(path + ": token lines disagree with the header shape");
  for (long long t = 0; t < t_len; ++t) {
    double sum = out.matrix.weights.row(t).sum();
    if (std::fabs(sum - 1.0) > 1e-5 || (out.matrix.weights.row(t).array() < 0.0).any()) {
      out.invalid_rows.push_back(t);
      std::cerr << "warning: " << path << ": row " << t << " is not a probability distribution"
                << " (sum " << sum << ")\n";
    }
  }
  return out;
}

}  // namespace phonseg
