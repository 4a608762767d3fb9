#ifndef DYHFL_RNG_HPP_
#define DYHFL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dyhfl {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a path of stream indices, so
// that every (round, agent, purpose) draw has its own reproducible stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(seed, path));
}

}  // namespace dyhfl

#endif  // DYHFL_RNG_HPP_
