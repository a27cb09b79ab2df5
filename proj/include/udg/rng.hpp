#pragma once

#include <cstdint>

namespace udg {

// Counter-based generator.
//
// The i-th 64-bit output of a stream with seed s is the splitmix64 finalizer
// applied to s + (i + 1) * 0x9E3779B97F4A7C15, i.e. exactly the i-th output of
// splitmix64 started from state s. A stream is fully described by
// (seed, counter), so a sample depends only on its position and never on the
// evaluation order of other streams.
//
//   uniform(): (bits >> 11) * 2^-53 + 2^-54, which lies strictly inside (0, 1).
//   normal():  Box-Muller cosine branch on two consecutive uniforms; no value
//              is cached between calls.
//   split(k):  a child stream with seed mix(seed ^ mix(k + golden)) and
//              counter 0. Children with distinct keys are independent streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double normal() noexcept;

  [[nodiscard]] Rng split(std::uint64_t key) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// Stable 64-bit FNV-1a hash, used to derive stream keys from names.
std::uint64_t stream_key(const char* name) noexcept;

}  // namespace udg
