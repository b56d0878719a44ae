#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pestvl {

// Uniform double in [0, 1) from the top 53 bits of the generator output.
// Used instead of std::uniform_real_distribution so that draw sequences are
// identical across standard library implementations.
inline double uniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (no cached second sample).
inline double gaussian(std::mt19937_64& rng) {
  double u1 = uniformUnit(rng);
  double u2 = uniformUnit(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Gumbel(0,1) sample, the perturbation used for stochastic window selection.
inline double gumbel(std::mt19937_64& rng) {
  double u = uniformUnit(rng);
  if (u < 1e-300) u = 1e-300;
  return -std::log(-std::log(u));
}

}  // namespace pestvl
