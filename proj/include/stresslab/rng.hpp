#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace stresslab {

// All randomness in the library flows through this generator.  It is a plain
// splitmix64: tiny, fast, and -- unlike std::uniform_int_distribution -- its
// output is pinned down to the bit on every platform, which the byte-identical
// rerun guarantee depends on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased draw from [0, n).  n must be > 0.
  std::size_t below(std::size_t n);

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// FNV-1a, the stable 64-bit hash used for seed derivation and artifact
// fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a(std::uint64_t value);

// Seed chaining: fold extra context into a seed deterministically.
std::uint64_t chain_seed(std::uint64_t seed, std::string_view part);
std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t part);

// A random order of {0..n-1}; callers take prefixes of it so that selections
// under the same seed are nested across portion levels.
std::vector<std::size_t> random_order(std::size_t n, Rng& rng);

}  // namespace stresslab
