#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace usbt {

// SplitMix64 (Steele, Lea, Flood 2014). All randomness in the toolkit flows
// through this generator, so every pipeline stage is reproducible from a
// 64-bit seed and can be matched by implementations in other languages.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; pair cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // n is tiny compared to 2^64 everywhere we use this; modulo bias is
  // below 2^-40 and irrelevant next to the determinism requirement.
  uint64_t bounded(uint64_t n) { return next() % n; }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Documented seed-derivation hash: fold each component into the stream with
// one SplitMix64 finalization round per component.
inline uint64_t mix_seed(uint64_t seed, uint64_t component) {
  SplitMix64 g(seed ^ (component + 0x9e3779b97f4a7c15ULL));
  return g.next();
}

template <typename... Rest>
uint64_t mix_seed(uint64_t seed, uint64_t component, Rest... rest) {
  return mix_seed(mix_seed(seed, component), rest...);
}

// Fisher-Yates, descending, j = next() % (i + 1). This exact order is part
// of the dataset-shuffle contract.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.bounded(i)]);
  }
}

}  // namespace usbt
