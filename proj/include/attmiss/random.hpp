#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace attmiss {

// Independent RNG substreams are derived from a master seed and a path of
// indices (replicate, imputation, ...) so that results do not depend on
// which worker processes which task.
enum class Stream : std::uint64_t {
  data = 1,
  imputation = 2,
  bootstrap = 3,
  oracle = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (const auto p : path) {
    s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  }
  return s;
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t index) {
  return derive_seed(master, {static_cast<std::uint64_t>(stream), index});
}

using Rng = std::mt19937_64;

}  // namespace attmiss
