#include "core/rng.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace atdkit {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                       std::uint64_t index) {
  std::uint64_t state = seed ^ fnv1a(tag) ^ (index * 0x9e3779b97f4a7c15ULL);
  return splitmix64(state);
}

RngStream::RngStream(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : state_) word = splitmix64(sm);
}

RngStream RngStream::derive(std::uint64_t seed, std::string_view tag,
                            std::uint64_t index) {
  return RngStream(mix_seed(seed, tag, index));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return std::ldexp(static_cast<double>(next_u64() >> 11), -53);
}

double RngStream::uniform(double lo, double hi) {
  require(lo <= hi, ErrorCode::InvalidArgument,
          "uniform: empty interval [", lo, ", ", hi, ")");
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u is bumped off zero so log stays finite.
  double u = uniform();
  if (u <= 0.0) u = 0x1p-53;
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double angle = 2.0 * std::numbers::pi * v;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::size_t RngStream::index(std::size_t n) {
  require(n > 0, ErrorCode::InvalidArgument, "index: n must be positive");
  // Modulo bias is < 2^-50 for any n at desk scale; determinism matters more.
  return static_cast<std::size_t>(next_u64() % n);
}

void RngStream::shuffle(std::vector<std::size_t>& values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[index(i)]);
  }
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace atdkit
