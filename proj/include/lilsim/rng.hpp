#pragma once

#include <array>
#include <cstdint>

namespace lilsim {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
/// Maps a 128-bit counter under a 64-bit key to 128 random bits.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Addresses one standard normal draw: (master seed, path id, counter).
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Standard normal draw as a pure function of the key.
///
/// Counters 2c and 2c+1 share one Philox block and are the two Box-Muller
/// outputs of that block.
double gaussian_draw(const StreamKey& key) noexcept;

/// Box-Muller pair for Philox block `block` of (seed, path).
std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint64_t path,
                                    std::uint64_t block) noexcept;

/// SplitMix64 finalizer; used to derive sub-stream path ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Per-path view of the counter space. Draw (step n, component j) lives at
/// counter n * stride + j. Caches the last Philox block so sequential access
/// costs one block per two draws.
class NormalStream {
 public:
  NormalStream() = default;
  NormalStream(std::uint64_t seed, std::uint64_t path) : seed_(seed), path_(path) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t path() const noexcept { return path_; }

  double at(std::uint64_t counter) noexcept {
    const std::uint64_t block = counter >> 1;
    if (!cached_ || block != block_) {
      pair_ = gaussian_pair(seed_, path_, block);
      block_ = block;
      cached_ = true;
    }
    return pair_[counter & 1u];
  }

  double draw(std::uint64_t step, std::uint64_t component, std::uint64_t stride) noexcept {
    return at(step * stride + component);
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t path_ = 0;
  std::uint64_t block_ = 0;
  bool cached_ = false;
  std::array<double, 2> pair_{};
};

}  // namespace lilsim
