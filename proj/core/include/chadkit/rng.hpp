#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace chadkit {

// All randomness in the toolkit runs on this engine. Streams are derived
// from a root seed by name so that toggling one component never shifts the
// draws seen by another.
using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for seed mixing.
std::uint64_t mix_seed(std::uint64_t x);

// Seed for the stream `name` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

// Seed for a sub-stream indexed by integers (e.g. phase, epoch, record id).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Named stream roots used by training and the benchmarks.
struct SeedStreams {
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t negsampler = 0;
  std::uint64_t noise = 0;
  std::uint64_t dropout = 0;
  std::uint64_t bench = 0;
  std::uint64_t eval = 0;

  static SeedStreams from_root(std::uint64_t root);
};

// Uniform double in the open interval (0, 1).
double uniform_open01(Rng& rng);

}  // namespace chadkit
