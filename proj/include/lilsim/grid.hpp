#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lilsim/numeric.hpp"

namespace lilsim {

enum class StepKind { harmonic, power, constant };

/// Deterministic step-size law.
///
///   harmonic: tau_k = min(scale / k, cap)
///   power:    tau_k = min(scale * k^-theta, cap)
///   constant: tau_k = cap
///
/// The constant kind never vanishes and is kept as a baseline that fails the
/// LIL step conditions.
struct StepSpec {
  StepKind kind = StepKind::harmonic;
  double scale = 1.0;
  double theta = 1.0;
  double cap = 1.0;

  static StepSpec harmonic(double scale = 1.0, double cap = 1.0) { return {StepKind::harmonic, scale, 1.0, cap}; }
  static StepSpec power(double theta, double scale = 1.0, double cap = 1.0) {
    return {StepKind::power, scale, theta, cap};
  }
  static StepSpec constant(double tau) { return {StepKind::constant, 1.0, 0.0, tau}; }

  /// tau_k for k >= 1; tau_0 = 0.
  double step(std::uint64_t k) const noexcept;

  /// sup_k tau_k.
  double max_step() const noexcept;

  /// Decay exponent of tau_k (0 for constant steps).
  double decay_exponent() const noexcept;

  /// First index from which the cap no longer binds.
  std::uint64_t uncapped_from() const noexcept;

  bool vanishes() const noexcept { return kind != StepKind::constant; }
  bool sum_diverges() const noexcept { return decay_exponent() <= 1.0; }
  bool nonincreasing() const noexcept { return true; }

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  friend bool operator==(const StepSpec&, const StepSpec&) = default;
};

const char* to_string(StepKind kind) noexcept;
StepKind step_kind_from_string(const std::string& name);

class GridCursor;

/// Decreasing-step time grid t_n = sum_{k<=n} tau_k with tau_0 = 0.
///
/// Grids whose length fits in one block are stored in full. Longer grids keep
/// only the compensated running sum at every block boundary and regenerate
/// steps on demand; both paths run the same arithmetic, so times are
/// identical either way.
class TimeGrid {
 public:
  static constexpr std::uint64_t kDefaultBlockSize = std::uint64_t{1} << 20;

  static TimeGrid build(const StepSpec& spec, std::uint64_t n_max,
                        std::uint64_t block_size = kDefaultBlockSize);

  const StepSpec& spec() const noexcept { return spec_; }
  std::uint64_t n_max() const noexcept { return n_max_; }
  std::uint64_t block_size() const noexcept { return block_size_; }
  bool materialized() const noexcept { return !times_.empty(); }

  /// tau_n (tau_0 = 0).
  double step(std::uint64_t n) const;
  /// t_n. O(1) for stored grids, O(block) otherwise.
  double time(std::uint64_t n) const;
  /// t_{n_max}.
  double horizon() const noexcept { return horizon_; }
  double max_step() const noexcept { return spec_.max_step(); }

  /// Full arrays; only available for stored grids.
  std::span<const double> steps() const;
  std::span<const double> times() const;

  /// Forward walker positioned at index `start`.
  GridCursor cursor(std::uint64_t start = 0) const;

  /// Largest n <= n_max with t_n <= t (t >= 0).
  std::uint64_t index_at_or_before(double t) const;

 private:
  friend class GridCursor;
  CompensatedSum sum_at(std::uint64_t n) const;

  StepSpec spec_;
  std::uint64_t n_max_ = 0;
  std::uint64_t block_size_ = kDefaultBlockSize;
  double horizon_ = 0.0;
  std::vector<double> steps_;
  std::vector<double> times_;
  std::vector<CompensatedSum> block_sums_;  // running sum at n = b * block_size
};

/// Walks a grid forward one step at a time.
class GridCursor {
 public:
  GridCursor(const TimeGrid& grid, std::uint64_t start);

  std::uint64_t index() const noexcept { return n_; }
  double time() const noexcept { return t_; }
  double step() const noexcept { return tau_; }
  bool done() const noexcept { return n_ >= grid_->n_max(); }

  /// Moves to n + 1. Precondition: !done().
  void advance() noexcept {
    ++n_;
    if (stored_) {
      tau_ = grid_->steps_[n_];
      t_ = grid_->times_[n_];
    } else {
      tau_ = grid_->spec_.step(n_);
      sum_.add(tau_);
      t_ = sum_.value();
    }
  }

 private:
  const TimeGrid* grid_;
  bool stored_;
  std::uint64_t n_;
  double tau_;
  double t_;
  CompensatedSum sum_;
};

/// Quasi-uniform subsequence n_(k) with t_{n_(k)} <= k < t_{n_(k)+1}.
struct QuasiUniformIndex {
  std::vector<std::uint64_t> n_of;   // k = 0..k_max
  std::vector<double> tilde_times;   // t~_k = t_{n_(k)}
  std::vector<double> tilde_steps;   // t~_k - t~_{k-1}, t~_0 step = 0
  double max_step = 0.0;             // tau-bar of the underlying grid

  std::uint64_t k_max() const noexcept { return n_of.empty() ? 0 : n_of.size() - 1; }
};

/// Builds n_(k) for k = 0..k_max in one forward pass. n_(0) = 0.
QuasiUniformIndex quasi_uniform_index(const TimeGrid& grid, std::uint64_t k_max);

/// k~ with t~_{k~} <= t_n < t~_{k~+1}. When several k share n_(k) = n the
/// largest one is returned.
std::uint64_t tilde_of(const QuasiUniformIndex& index, const TimeGrid& grid, std::uint64_t n);

}  // namespace lilsim
