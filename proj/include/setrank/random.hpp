#ifndef SETRANK_RANDOM_HPP
#define SETRANK_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace setrank {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Independent generator for a named purpose ("init", "shuffle", "offsets",
/// "perturb", ...) derived from one run seed.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  return Rng(detail::splitmix64(detail::splitmix64(seed) ^ detail::fnv1a(name)));
}

}  // namespace setrank

#endif  // SETRANK_RANDOM_HPP
