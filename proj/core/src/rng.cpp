#include "chadkit/rng.hpp"

namespace chadkit {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  // FNV-1a over the stream name, then mixed with the root.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(root ^ mix_seed(h));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = mix_seed(parent);
  s = mix_seed(s ^ a);
  s = mix_seed(s ^ b);
  return mix_seed(s ^ c);
}

SeedStreams SeedStreams::from_root(std::uint64_t root) {
  SeedStreams s;
  s.init = derive_seed(root, "init");
  s.shuffle = derive_seed(root, "shuffle");
  s.negsampler = derive_seed(root, "negsampler");
  s.noise = derive_seed(root, "noise");
  s.dropout = derive_seed(root, "dropout");
  s.bench = derive_seed(root, "bench");
  s.eval = derive_seed(root, "eval");
  return s;
}

double uniform_open01(Rng& rng) {
  // 53 random mantissa bits; zero is redrawn so the interval is open.
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

}  // namespace chadkit
