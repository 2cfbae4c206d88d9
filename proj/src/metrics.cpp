#include "phonseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "phonseg/text.hpp"

namespace phonseg {

namespace {

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

BoundaryScore from_counts(long correct, long proposed, long gold) {
  BoundaryScore s;
  s.correct = correct;
  s.proposed = proposed;
  s.gold = gold;
  s.precision = proposed > 0 ? static_cast<double>(correct) / proposed : 0.0;
  s.recall = gold > 0 ? static_cast<double>(correct) / gold : 0.0;
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

}  // namespace

BoundaryScore boundary_prf(const Segmentation& gold, const Segmentation& hyp) {
  if (gold.length != hyp.length)
    throw std::invalid_argument("boundary_prf: segmentation lengths differ");
  std::vector<int> common;
  std::set_intersection(gold.boundaries.begin(), gold.boundaries.end(), hyp.boundaries.begin(),
                        hyp.boundaries.end(), std::back_inserter(common));
  return from_counts(static_cast<long>(common.size()), static_cast<long>(hyp.boundaries.size()),
                     static_cast<long>(gold.boundaries.size()));
}

BoundaryScore boundary_prf(const std::vector<Segmentation>& gold,
                           const std::vector<Segmentation>& hyp) {
  if (gold.size() != hyp.size()) throw std::invalid_argument("boundary_prf: corpus size mismatch");
  long correct = 0, proposed = 0, g = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    BoundaryScore s = boundary_prf(gold[i], hyp[i]);
    correct += s.correct;
    proposed += s.proposed;
    g += s.gold;
  }
  return from_counts(correct, proposed, g);
}

std::set<std::string> segmentation_types(const std::vector<std::vector<std::string>>& sequences,
                                         const std::vector<Segmentation>& segs) {
  if (sequences.size() != segs.size())
    throw std::invalid_argument("segmentation_types: size mismatch");
  std::set<std::string> types;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    for (const auto& w : apply_segmentation(sequences[i], segs[i])) types.insert(join(w, ""));
  return types;
}

TypeScore type_metrics(const std::vector<std::vector<std::string>>& sequences,
                       const std::vector<Segmentation>& gold,
                       const std::vector<Segmentation>& hyp) {
  TypeScore s;
  std::set<std::string> gold_types = segmentation_types(sequences, gold);
  std::set<std::string> hyp_types = segmentation_types(sequences, hyp);
  std::set_intersection(hyp_types.begin(), hyp_types.end(), gold_types.begin(), gold_types.end(),
                        std::inserter(s.correct, s.correct.begin()));
  s.hyp_types = hyp_types.size();
  s.gold_types = gold_types.size();
  s.precision = s.hyp_types ? static_cast<double>(s.correct.size()) / s.hyp_types : 0.0;
  s.recall = s.gold_types ? static_cast<double>(s.correct.size()) / s.gold_types : 0.0;
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu4: no hypotheses");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu4: hypothesis/reference count mismatch");
  constexpr int kMaxOrder = 4;
  long matched[kMaxOrder] = {0, 0, 0, 0};
  long total[kMaxOrder] = {0, 0, 0, 0};
  long hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::map<std::vector<std::string>, long> ref_counts, hyp_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i)
        ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
      for (std::size_t i = 0; i + n <= hyp.size(); ++i)
        ++hyp_counts[std::vector<std::string>(hyp.begin() + i, hyp.begin() + i + n)];
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_precision = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n]) / total[n]);
  }
  double bp = hyp_len < ref_len && hyp_len > 0
                  ? std::exp(1.0 - static_cast<double>(ref_len) / hyp_len)
                  : 1.0;
  return 100.0 * bp * std::exp(log_precision / kMaxOrder);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

Correlation pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson_r: length mismatch");
  const std::size_t n = xs.size();
  if (n < 3) throw std::invalid_argument("pearson_r: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: zero variance");
  Correlation c;
  c.r = sxy / std::sqrt(sxx * syy);
  c.r = std::clamp(c.r, -1.0, 1.0);
  double df = static_cast<double>(n - 2);
  double r2 = c.r * c.r;
  if (r2 >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  double t2 = r2 * df / (1.0 - r2);
  // two-tailed: P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2)
  c.p_value = incomplete_beta(df / 2.0, 0.5, df / (df + t2));
  return c;
}

double mean_token_length(const std::vector<Segmentation>& segs) {
  if (segs.empty()) throw std::invalid_argument("mean_token_length: empty input");
  long tokens = 0, units = 0;
  for (const auto& s : segs) {
    tokens += static_cast<long>(s.word_count());
    units += s.length;
  }
  return static_cast<double>(units) / tokens;
}

}  // namespace phonseg
