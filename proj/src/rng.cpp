#include "stresslab/rng.hpp"

namespace stresslab {

std::size_t Rng::below(std::size_t n) {
  // Rejection sampling on the top of the range keeps the draw unbiased.
  std::uint64_t bound = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a_fold(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t finalize(std::uint64_t z) {
  // splitmix finalizer so that chained seeds differ in all bits.
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t fnv1a(std::string_view bytes) { return fnv1a_fold(kFnvOffset, bytes); }

std::uint64_t fnv1a(std::uint64_t value) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  return fnv1a(std::string_view(buf, 8));
}

std::uint64_t chain_seed(std::uint64_t seed, std::string_view part) {
  return finalize(fnv1a_fold(seed ^ kFnvOffset, part) ^ 0x5bd1e995);
}

std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t part) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((part >> (8 * i)) & 0xff);
  return chain_seed(seed, std::string_view(buf, 8));
}

std::vector<std::size_t> random_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  return order;
}

}  // namespace stresslab
