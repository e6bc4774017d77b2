#include "lilsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace lilsim {
namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void round_once(PhiloxCounter& ctr, const PhiloxKey& key) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

// 53 random bits mapped into (0, 1].
inline double open_closed_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    round_once(counter, key);
  }
  return counter;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint64_t path,
                                    std::uint64_t block) noexcept {
  const PhiloxCounter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                          static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  const PhiloxKey key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const PhiloxCounter out = philox4x32(ctr, key);
  const std::uint64_t b0 = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  const std::uint64_t b1 = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  const double u1 = open_closed_unit(b0);
  const double u2 = open_closed_unit(b1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double gaussian_draw(const StreamKey& key) noexcept {
  return gaussian_pair(key.seed, key.path, key.counter >> 1)[key.counter & 1u];
}

}  // namespace lilsim
