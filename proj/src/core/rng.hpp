#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace atdkit {

// Deterministic random stream, independent of the standard library's
// distribution implementations so artifacts are bit-reproducible across
// toolchains. Generator is xoshiro256++ seeded through splitmix64.
//
// All randomness in the library flows through named streams derived from a
// run seed; independent concerns (parameter init, shuffling, attack starts,
// latent draws) use separate streams so one consumer's draw count never
// perturbs another's sequence.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed);

  static RngStream derive(std::uint64_t seed, std::string_view tag,
                          std::uint64_t index = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; caches the paired deviate.
  double normal();

  // Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n);

  // Fisher-Yates.
  void shuffle(std::vector<std::size_t>& values);

private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable tag mixing for stream derivation: splitmix64 over
// seed ^ fnv1a(tag) ^ golden-ratio-scrambled index.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                       std::uint64_t index = 0);

std::vector<std::size_t> iota_indices(std::size_t n);

}  // namespace atdkit
