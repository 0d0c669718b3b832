#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mazeadapt {

// Seeded random source that is reproducible across platforms and standard
// libraries: the engine is the fully specified std::mt19937_64 and the
// distributions are implemented here instead of taken from <random>, whose
// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller (pairs generated, one cached).
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void fill_uniform(std::span<double> out, double lo, double hi, Rng& rng);
void fill_normal(std::span<double> out, Rng& rng);

}  // namespace mazeadapt
