#include "mazeadapt/rng.hpp"

#include <cmath>
#include <numbers>

#include "mazeadapt/error.hpp"

namespace mazeadapt {

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ContractError("Rng::below requires a positive bound");
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void fill_uniform(std::span<double> out, double lo, double hi, Rng& rng) {
  for (double& v : out) v = rng.uniform(lo, hi);
}

void fill_normal(std::span<double> out, Rng& rng) {
  for (double& v : out) v = rng.normal();
}

}  // namespace mazeadapt
