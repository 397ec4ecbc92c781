#pragma once

#include <cstdint>
#include <random>

namespace netcausal {

// splitmix64: fast, well-mixed 64-bit permutation used to derive independent
// seed streams from one master seed. Distinct (stream, counter) pairs give
// statistically unrelated engines regardless of thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stage identifiers for the pipeline's substreams. Values are part of the
// reproducibility contract: changing them changes every seeded run.
enum class Stream : std::uint64_t {
  network = 1,
  covariates = 2,
  treatment = 3,
  outcome = 4,
  replicate = 5,
  fixed_point_treated = 6,
  fixed_point_control = 7,
  fit = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t counter = 0) {
  std::uint64_t s = splitmix64(master ^ (0xA5A5A5A5DEADBEEFull +
                                         static_cast<std::uint64_t>(stream)));
  return splitmix64(s + 0x9E3779B97F4A7C15ull * (counter + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream stream,
                                std::uint64_t counter = 0) {
  return std::mt19937_64(derive_seed(master, stream, counter));
}

}  // namespace netcausal
