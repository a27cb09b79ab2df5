#include "udg/rng.hpp"

#include <cmath>
#include <numbers>

namespace udg {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t Rng::mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() noexcept {
  ++counter_;
  return mix(seed_ + counter_ * kGolden);
}

double Rng::uniform() noexcept {
  constexpr double kScale = 0x1.0p-53;
  return static_cast<double>(next_u64() >> 11) * kScale + 0x1.0p-54;
}

double Rng::normal() noexcept {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t key) const noexcept {
  return Rng(mix(seed_ ^ mix(key + kGolden)), 0);
}

std::uint64_t stream_key(const char* name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = name; *p != '\0'; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace udg
