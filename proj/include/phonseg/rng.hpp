#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace phonseg {

// mt19937_64 with hand-rolled draws. std::uniform_*_distribution is
// implementation-defined, which would break the bit-reproducibility
// contracts, so all sampling goes through these methods.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1)
  double uniform01() { return (engine_() >> 11) * (1.0 / 9007199254740992.0); }

  // uniform in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    // Marsaglia polar, no caching
    for (;;) {
      double u = 2.0 * uniform01() - 1.0;
      double v = 2.0 * uniform01() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_int(i)]);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace phonseg
