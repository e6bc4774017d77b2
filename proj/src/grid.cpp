#include "lilsim/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lilsim/errors.hpp"

namespace lilsim {

double StepSpec::step(std::uint64_t k) const noexcept {
  if (k == 0) return 0.0;
  switch (kind) {
    case StepKind::harmonic:
      return std::min(scale / static_cast<double>(k), cap);
    case StepKind::power:
      return std::min(scale * std::pow(static_cast<double>(k), -theta), cap);
    case StepKind::constant:
      return cap;
  }
  return cap;
}

double StepSpec::max_step() const noexcept {
  return kind == StepKind::constant ? cap : std::min(scale, cap);
}

double StepSpec::decay_exponent() const noexcept {
  switch (kind) {
    case StepKind::harmonic:
      return 1.0;
    case StepKind::power:
      return theta;
    case StepKind::constant:
      return 0.0;
  }
  return 0.0;
}

std::uint64_t StepSpec::uncapped_from() const noexcept {
  if (kind == StepKind::constant || scale <= cap) return 1;
  const double k = std::ceil(std::pow(scale / cap, 1.0 / decay_exponent()));
  return k >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(k);
}

void StepSpec::validate() const {
  if (!(std::isfinite(scale) && scale > 0.0)) {
    throw ConfigError("grid.scale must be a positive finite real, got " + std::to_string(scale));
  }
  if (!(std::isfinite(cap) && cap > 0.0)) {
    throw ConfigError("grid.cap must be a positive finite real, got " + std::to_string(cap));
  }
  if (kind == StepKind::power && !(theta > 0.0 && theta <= 1.0)) {
    throw ConfigError("grid.theta must lie in (0,1], got " + std::to_string(theta));
  }
}

const char* to_string(StepKind kind) noexcept {
  switch (kind) {
    case StepKind::harmonic:
      return "harmonic";
    case StepKind::power:
      return "power";
    case StepKind::constant:
      return "constant";
  }
  return "?";
}

StepKind step_kind_from_string(const std::string& name) {
  if (name == "harmonic") return StepKind::harmonic;
  if (name == "power") return StepKind::power;
  if (name == "constant") return StepKind::constant;
  throw ConfigError("unknown step kind '" + name + "' (expected harmonic, power or constant)");
}

TimeGrid TimeGrid::build(const StepSpec& spec, std::uint64_t n_max, std::uint64_t block_size) {
  spec.validate();
  if (n_max < 1) throw ConfigError("grid.n_steps must be >= 1");
  if (block_size < 1) throw ConfigError("grid.block_size must be >= 1");

  TimeGrid grid;
  grid.spec_ = spec;
  grid.n_max_ = n_max;
  grid.block_size_ = block_size;

  const bool store = n_max <= block_size;
  if (store) {
    grid.steps_.resize(n_max + 1);
    grid.times_.resize(n_max + 1);
    grid.steps_[0] = 0.0;
    grid.times_[0] = 0.0;
  }
  CompensatedSum sum;
  grid.block_sums_.push_back(sum);
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    const double tau = spec.step(n);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw ConfigError("step law produced a nonpositive step tau_" + std::to_string(n) + " = " +
                        std::to_string(tau));
    }
    sum.add(tau);
    if (store) {
      grid.steps_[n] = tau;
      grid.times_[n] = sum.value();
    } else if (n % block_size == 0) {
      grid.block_sums_.push_back(sum);
    }
  }
  grid.horizon_ = sum.value();
  return grid;
}

double TimeGrid::step(std::uint64_t n) const {
  if (n > n_max_) throw HorizonError("step index " + std::to_string(n) + " beyond grid of " + std::to_string(n_max_));
  return materialized() ? steps_[n] : spec_.step(n);
}

CompensatedSum TimeGrid::sum_at(std::uint64_t n) const {
  const std::uint64_t b = n / block_size_;
  CompensatedSum sum = block_sums_[std::min<std::uint64_t>(b, block_sums_.size() - 1)];
  for (std::uint64_t k = b * block_size_ + 1; k <= n; ++k) sum.add(spec_.step(k));
  return sum;
}

double TimeGrid::time(std::uint64_t n) const {
  if (n > n_max_) throw HorizonError("time index " + std::to_string(n) + " beyond grid of " + std::to_string(n_max_));
  if (materialized()) return times_[n];
  if (n == 0) return 0.0;
  return sum_at(n).value();
}

std::span<const double> TimeGrid::steps() const {
  if (!materialized()) throw UsageError("grid is generated in blocks; step array not stored");
  return steps_;
}

std::span<const double> TimeGrid::times() const {
  if (!materialized()) throw UsageError("grid is generated in blocks; time array not stored");
  return times_;
}

GridCursor TimeGrid::cursor(std::uint64_t start) const { return GridCursor(*this, start); }

std::uint64_t TimeGrid::index_at_or_before(double t) const {
  if (materialized()) {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::uint64_t>(std::distance(times_.begin(), it)) - 1;
  }
  std::uint64_t b = 0;
  while (b + 1 < block_sums_.size() && block_sums_[b + 1].value() <= t) ++b;
  GridCursor cur(*this, b * block_size_);
  while (!cur.done()) {
    const std::uint64_t n = cur.index();
    cur.advance();
    if (cur.time() > t) return n;
  }
  return n_max_;
}

GridCursor::GridCursor(const TimeGrid& grid, std::uint64_t start)
    : grid_(&grid), stored_(grid.materialized()), n_(start) {
  if (start > grid.n_max()) throw HorizonError("cursor start " + std::to_string(start) + " beyond grid");
  tau_ = grid.step(start);
  if (stored_) {
    t_ = grid.times_[start];
  } else {
    sum_ = start == 0 ? CompensatedSum{} : grid.sum_at(start);
    t_ = start == 0 ? 0.0 : sum_.value();
  }
}

QuasiUniformIndex quasi_uniform_index(const TimeGrid& grid, std::uint64_t k_max) {
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  if (grid.horizon() < static_cast<double>(k_max)) {
    const auto first = static_cast<std::uint64_t>(std::floor(grid.horizon())) + 1;
    throw HorizonError("grid ends at t = " + std::to_string(grid.horizon()) +
                       "; quasi-uniform index k = " + std::to_string(first) + " is unreachable");
  }
  QuasiUniformIndex index;
  index.max_step = grid.max_step();
  index.n_of.assign(k_max + 1, 0);
  index.tilde_times.assign(k_max + 1, 0.0);
  index.tilde_steps.assign(k_max + 1, 0.0);

  GridCursor cur = grid.cursor(0);
  // Invariant on entry for each k: t_{cur} <= k (holds at k = 0 with cur = 0).
  for (std::uint64_t k = 0; k <= k_max; ++k) {
    const double target = static_cast<double>(k);
    while (!cur.done()) {
      GridCursor next = cur;
      next.advance();
      if (next.time() > target) break;
      cur = next;
    }
    index.n_of[k] = cur.index();
    index.tilde_times[k] = cur.time();
    if (k > 0) index.tilde_steps[k] = index.tilde_times[k] - index.tilde_times[k - 1];
  }
  return index;
}

std::uint64_t tilde_of(const QuasiUniformIndex& index, const TimeGrid& grid, std::uint64_t n) {
  if (index.n_of.empty()) throw UsageError("empty quasi-uniform index");
  if (n > grid.n_max()) throw HorizonError("index " + std::to_string(n) + " beyond grid");
  // Largest k with n_(k) <= n.
  const auto it = std::upper_bound(index.n_of.begin(), index.n_of.end(), n);
  const auto k = static_cast<std::uint64_t>(std::distance(index.n_of.begin(), it)) - 1;
  if (k == index.k_max()) {
    // Need n < n_(k_max + 1). Either t_n sits below the guaranteed lower bound
    // t~_{k_max+1} >= k_max + 1 - tau-bar, or the grid shows t_{n+1} <= k_max + 1.
    const double t = grid.time(n);
    const double upper = static_cast<double>(k) + 1.0;
    const bool below_bound = t < upper - index.max_step;
    const bool next_inside = n < grid.n_max() && grid.time(n + 1) <= upper;
    if (!below_bound && !next_inside) {
      throw HorizonError("t_" + std::to_string(n) + " = " + std::to_string(t) +
                         " is not bracketed by the quasi-uniform index (k_max = " + std::to_string(k) + ")");
    }
  }
  return k;
}

}  // namespace lilsim
