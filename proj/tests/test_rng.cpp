#include "doctest.h"

#include <cmath>
#include <set>

#include "lilsim/rng.hpp"

using namespace lilsim;

TEST_CASE("philox known-answer vectors") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("gaussian_draw is a pure function of the key") {
  const StreamKey k{42, 7, 12345};
  CHECK(gaussian_draw(k) == gaussian_draw(k));
  CHECK(gaussian_draw(k) != gaussian_draw(StreamKey{42, 8, 12345}));
  CHECK(gaussian_draw(k) != gaussian_draw(StreamKey{43, 7, 12345}));
}

TEST_CASE("NormalStream agrees with gaussian_draw") {
  NormalStream s(9, 3);
  for (std::uint64_t c = 0; c < 50; ++c) CHECK(s.at(c) == gaussian_draw({9, 3, c}));
  CHECK(s.draw(5, 1, 2) == gaussian_draw({9, 3, 11}));
  CHECK(s.at(3) == gaussian_draw({9, 3, 3}));
}

TEST_CASE("gaussian_draw moments and lag-1 correlation over 1e6 counters") {
  const std::uint64_t n = 1000000;
  double sum = 0.0, sq = 0.0, lag = 0.0, prev = 0.0;
  NormalStream s(2024, 0);
  for (std::uint64_t c = 0; c < n; ++c) {
    const double x = s.at(c);
    sum += x;
    sq += x * x;
    if (c > 0) lag += x * prev;
    prev = x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::fabs(var - 1.0) < 0.01);
  CHECK(std::fabs(lag / (n - 1)) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("mix64 spreads consecutive inputs") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix64(i));
  CHECK(seen.size() == 1000);
}
