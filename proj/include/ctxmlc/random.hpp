#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace ctxmlc {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: the output is a pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Random draws addressed by coordinates instead of by sequence position, so
/// the value at (a, b, stream) never depends on iteration order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept;

  std::array<std::uint32_t, 4> bits(std::uint64_t a, std::uint32_t b, std::uint32_t stream) const;

  // Two independent uniforms in [0, 1) from one Philox block.
  std::array<double, 2> uniform2(std::uint64_t a, std::uint32_t b, std::uint32_t stream) const;

  double uniform(std::uint64_t a, std::uint32_t b, std::uint32_t stream) const {
    return uniform2(a, b, stream)[0];
  }

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Sequential stream on top of CounterRng: the n-th call reads block n.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t stream) noexcept : rng_(seed), stream_(stream) {}

  double uniform();
  double normal();  // Box-Muller, standard normal
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::size_t below(std::size_t n);

 private:
  CounterRng rng_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  std::array<double, 2> pending_{};
  bool has_pending_ = false;
};

/// Converts 64 random bits into a double in [0, 1) with 53 bits of precision.
inline double bits_to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t word = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace ctxmlc
