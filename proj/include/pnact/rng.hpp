#pragma once

#include <cstdint>
#include <string_view>

namespace pnact {

// Deterministic pseudo-random source used wherever a component needs noise.
// xoshiro256++ with splitmix64 seeding; uniform and normal draws are computed
// from raw 64-bit words directly so streams are reproducible byte-for-byte
// across runs and toolchains (the standard <random> distributions are
// implementation-defined and would break checkpoint determinism).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform draw in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform draw in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);
  // Standard normal via Box-Muller (no cached spare, so the stream position
  // after a draw does not depend on call history).
  double normal();
  double normal(double mean, double stddev);

 private:
  std::uint64_t state_[4];
};

// Seed for a named substream (e.g. "env", "policy-init", "schedule", "eval")
// derived from a root seed. Distinct names or indices give statistically
// independent streams; the same triple always gives the same stream.
std::uint64_t substream_seed(std::uint64_t root_seed, std::string_view name,
                             std::uint64_t index = 0);

}  // namespace pnact
