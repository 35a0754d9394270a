#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ecgtta {

// Counter-based 64-bit generator (splitmix64). State advances by a fixed
// odd constant and the output is a finalizing hash of the state, so streams
// are reproducible bit-for-bit on any platform from the integer seed alone.
//
//   state_{k+1} = state_k + 0x9E3779B97F4A7C15
//   output_k    = mix64(state_{k+1})
//
// Substreams are derived with Rng::substream(seed, index): the child seed is
// mix64(seed ^ mix64(index + GAMMA)), which decorrelates streams for
// consecutive indices. All randomness in this project flows through this
// generator; std:: distributions are never used (their streams are
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // Child seed for substream `index` of `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + kGamma));
  }

  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(derive(seed, index));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n), n > 0. Multiply-shift bound mapping.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    // Guard u1 = 0 (log singularity); the offset is below the 53-bit grid.
    double r = std::sqrt(-2.0 * std::log(u1 + 0x1.0p-64));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t state_;
};

}  // namespace ecgtta
