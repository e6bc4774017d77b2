#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lilsim/numeric.hpp"

namespace lilsim {

/// S / sqrt(2 t log log t). Throws DomainError for t <= e + 1e-9.
double lil_statistic(double S, double t);

/// Smallest t at which the statistic is defined.
double lil_threshold() noexcept;

struct LilCheckpoint {
  double t = 0.0;
  double S = 0.0;
  std::optional<double> stat;     // null while t <= e
  std::optional<double> run_max;  // extrema of the per-step statistic so far
  std::optional<double> run_min;

  friend bool operator==(const LilCheckpoint&, const LilCheckpoint&) = default;
};

struct LilOptions {
  double mu = 0.0;               // centering mu(f)
  bool self_center = false;      // center step k by the time average of steps < k (biased low)
  double checkpoint_ratio = 1.2; // geometric spacing in t
  double first_checkpoint = 1.0;
  bool record_checkpoints = true;
  std::optional<std::pair<double, double>> window;  // extra extrema over [t0, t1]
};

/// Running S = sum tau_k (f(Y_k) - mu) with the LIL statistic evaluated after
/// every step. Time is accumulated with the same compensated sum as the grid,
/// so t matches the grid time of the last absorbed step.
class LilAccumulator {
 public:
  explicit LilAccumulator(LilOptions options = {});

  void update(double tau, double f_val);

  double time() const noexcept { return t_.value(); }
  double sum() const noexcept { return S_.value(); }
  std::uint64_t steps() const noexcept { return steps_; }
  double mu() const noexcept { return options_.mu; }

  std::optional<double> statistic() const;
  std::optional<double> running_max() const { return run_max_; }
  std::optional<double> running_min() const { return run_min_; }
  std::optional<double> window_max() const { return win_max_; }
  std::optional<double> window_min() const { return win_min_; }

  const std::vector<LilCheckpoint>& checkpoints() const noexcept { return log_; }

  /// Appends a checkpoint at the current time unless one is already there.
  void close();

  /// Not defined: the accumulator is a sequential object.
  [[noreturn]] void merge(const LilAccumulator& other);

 private:
  void log_checkpoint();

  LilOptions options_;
  CompensatedSum t_;
  CompensatedSum S_;
  CompensatedSum raw_;  // sum tau f, for self-centering
  std::uint64_t steps_ = 0;
  double next_checkpoint_;
  std::optional<double> run_max_, run_min_, win_max_, win_min_;
  std::vector<LilCheckpoint> log_;
};

/// Free-function form of LilAccumulator::update.
LilAccumulator& time_average_update(LilAccumulator& acc, double tau, double f_val);

enum class VMethod { exact_linear, batch_means, ensemble };
const char* to_string(VMethod method) noexcept;

struct VEstimate {
  VMethod method = VMethod::ensemble;
  double v2 = 0.0;
  double stderr_v2 = 0.0;
  std::uint64_t count = 0;  // blocks or paths; 0 for exact

  double v() const;
  friend bool operator==(const VEstimate&, const VEstimate&) = default;
};

/// v = sigma / a for f = identity on the linear model.
VEstimate v_exact_linear(double a, double sigma);

/// Streaming batch means: contiguous time blocks of length L, a step that
/// straddles a boundary is split in proportion to its time in each block, and
/// the trailing partial block is dropped.
class BatchMeansAccumulator {
 public:
  BatchMeansAccumulator(double block_length, double mu);

  void add(double tau, double f_val);

  std::uint64_t complete_blocks() const noexcept { return blocks_.size(); }
  double block_length() const noexcept { return L_; }
  /// Block sums of tau * (f - mu).
  const std::vector<double>& block_sums() const noexcept { return blocks_; }

  /// Sample variance of centered block sums / L. Throws DomainError with
  /// fewer than two complete blocks.
  VEstimate estimate() const;

 private:
  double L_;
  double mu_;
  double filled_ = 0.0;
  CompensatedSum current_;
  std::vector<double> blocks_;
};

/// Batch means over a finished increment sequence (tau_k, f_val). L <= 0
/// selects sqrt(total time).
VEstimate v_batch_means(std::span<const std::pair<double, double>> increments, double block_length, double mu);

/// Sample variance of S_T over paths divided by the common T.
VEstimate v_ensemble(std::span<const std::pair<double, double>> finals);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool pass = true;  // p >= 0.01
  std::size_t n = 0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

/// One-sample KS test of samples / scale against N(0, 1).
KsResult normality_check(std::span<const double> samples, double scale = 1.0);

}  // namespace lilsim
