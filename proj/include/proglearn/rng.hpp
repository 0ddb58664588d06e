#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace proglearn {

// Generator id recorded in dataset headers so files stay auditable across platforms.
inline constexpr const char* kPrngId = "splitmix64-v1";

// splitmix64 stream. Chosen over std::mt19937_64 because the standard leaves
// uniform_int_distribution implementation-defined, which would break byte-identical
// regeneration of datasets on other toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased draw from [0, bound): rejection below the largest multiple of bound.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::domain_error("Rng::below: bound must be positive");
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  bool coin() { return next() >> 63; }

  // Uniform in [0, 1) with 53 bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// First k entries of a Fisher-Yates shuffle of [0, n), returned ascending.
inline std::vector<int> sample_distinct(int n, int k, std::uint64_t seed) {
  if (k < 0 || n < 0 || k > n) throw std::domain_error("sample_distinct: need 0 <= k <= n");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uint64_t j = static_cast<std::uint64_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

// In-place Fisher-Yates shuffle driven by the caller's stream.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::uint64_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

// FNV-1a, used to derive independent stream seeds from structured keys.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace proglearn
