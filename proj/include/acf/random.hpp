#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace acf {

using Rng = std::mt19937_64;

// Derives independent stream seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
inline std::size_t uniform_index(Rng& rng, std::size_t bound) {
  const std::uint64_t b = bound;
  const std::uint64_t limit = Rng::max() - (Rng::max() % b + 1) % b;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return static_cast<std::size_t>(x % b);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal draw (Box-Muller, cosine branch).
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <class T>
void fisher_yates(std::span<T> items, Rng& rng) {
  for (std::size_t k = items.size(); k > 1; --k) {
    std::size_t j = uniform_index(rng, k);
    std::swap(items[k - 1], items[j]);
  }
}

}  // namespace acf
