#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace semtree {

// Deterministic random primitives. std::mt19937_64 is pinned by the
// standard, but the <random> distributions are not, so every draw that
// feeds a reproducible artifact goes through the helpers below instead.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable seed derivation for independent streams (per trial, per node, ...).
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0x9e3779b97f4a7c15ULL + 1));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n) via rejection sampling.
inline uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Fisher-Yates with our own index draws (std::shuffle is not portable
// across standard library implementations).
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Floyd's algorithm: uniform random m-subset of [0, n), returned sorted.
inline std::vector<int64_t> sample_without_replacement(std::mt19937_64& rng,
                                                       int64_t n, int64_t m) {
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(m));
  for (int64_t j = n - m; j < n; ++j) {
    int64_t t = static_cast<int64_t>(uniform_index(rng, static_cast<uint64_t>(j + 1)));
    bool seen = false;
    for (int64_t x : out) {
      if (x == t) {
        seen = true;
        break;
      }
    }
    out.push_back(seen ? j : t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace semtree
