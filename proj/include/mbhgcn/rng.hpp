#pragma once

#include <cstdint>
#include <random>

namespace mbhgcn {

// splitmix64 finalizer; used to derive independent sub-stream seeds from a
// single master seed (epoch seeds, per-graph dropout seeds, ...).
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t tag) {
  return mix_seed(master ^ mix_seed(tag));
}

inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t tag_a, std::uint64_t tag_b) {
  return mix_seed(sub_seed(master, tag_a) ^ mix_seed(tag_b + 0x51ed270bULL));
}

// Uniform double in [0,1) built from the top 53 bits of the generator output.
// Fully specified by the mt19937_64 output stream, unlike the
// implementation-defined std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n). Bias is below 2^-53 per draw; fine for sampling.
inline int uniform_index(std::mt19937_64& g, int n) {
  return static_cast<int>(uniform01(g) * n);
}

}  // namespace mbhgcn
