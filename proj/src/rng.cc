#include "nounprobe/rng.hpp"

namespace nounprobe {

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto key : keys) {
    h = fnv1a64(key, h);
    h = splitmix64(h ^ 0x1f);  // separator so ("ab","c") != ("a","bc")
  }
  return h;
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  // Rejection from the largest multiple of bound below 2^64.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x <= limit) return x % bound;
  }
}

}  // namespace nounprobe
