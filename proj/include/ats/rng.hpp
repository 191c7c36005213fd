#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ats {

// Seeded random source. The engine is std::mt19937_64 (fully specified by the
// standard); the distributions are written out here because the standard
// library ones are implementation-defined and would break bit-reproducible
// logs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);
// Stable seed derivation, e.g. per-sample noise seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t salt = 0);

}  // namespace ats
