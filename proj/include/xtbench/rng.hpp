#pragma once

#include <cstdint>
#include <random>

namespace xtb {

// splitmix64, used to derive independent per-sample/per-request streams
// from (seed, stream id) so parallel generation stays order-stable.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline std::mt19937_64 derive_rng(uint64_t seed, uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream + 1)));
}

inline std::mt19937_64 derive_rng(uint64_t seed, uint64_t a, uint64_t b) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ (a + 1)) ^ (b + 0x51ed270b)));
}

}  // namespace xtb
