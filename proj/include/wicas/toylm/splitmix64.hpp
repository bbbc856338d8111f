#pragma once

#include <cstdint>

namespace wicas::toylm {

/// splitmix64 stream. One `next()` advances the state by the golden-ratio
/// increment and returns the mixed value; all arithmetic wraps modulo 2^64.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

struct SplitMixStep {
  std::uint64_t value;
  std::uint64_t new_state;
};

constexpr SplitMixStep splitmix64_next(std::uint64_t state) noexcept {
  SplitMix64 rng(state);
  std::uint64_t v = rng.next();
  return {v, rng.state()};
}

/// Uniform double in [-1, 1) from the top 53 bits of one draw.
constexpr double unit_interval_symmetric(std::uint64_t draw) noexcept {
  return 2.0 * (static_cast<double>(draw >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace wicas::toylm
