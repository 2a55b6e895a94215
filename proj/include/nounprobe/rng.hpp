#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nounprobe {

// mt19937_64's output sequence is fixed by the standard, so workloads are
// reproducible across standard libraries. Bounded draws go through
// uniform_index() rather than std::uniform_int_distribution, whose algorithm
// is implementation-defined.
using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Substream seed for a cell keyed by (seed, keys...).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> keys);

// Uniform integer in [0, bound). bound must be nonzero.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

}  // namespace nounprobe
