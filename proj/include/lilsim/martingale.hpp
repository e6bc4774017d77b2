#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lilsim/grid.hpp"
#include "lilsim/integrate.hpp"
#include "lilsim/model.hpp"
#include "lilsim/numeric.hpp"

namespace lilsim {

enum class LedgerMode { closed_form_linear, nested_mc };
const char* to_string(LedgerMode mode) noexcept;
LedgerMode ledger_mode_from_string(const std::string& name);

/// Tail coefficients A_k = sum_{i>=k} tau_i prod_{j=k+1}^{i} (1 + a tau_j)^{-1}
/// of the linear BEM scheme, for k = 0..n_max.
///
/// The backward recurrence A_{k-1} = tau_{k-1} + A_k / (1 + a tau_k) is seeded
/// at the grid end with the closed tail A_n = tau_n + 1/a, which holds for any
/// step sequence with divergent sum. bound(k) reports the rounding drift of
/// the recurrence against that closed form.
class LinearTailTable {
 public:
  static std::shared_ptr<const LinearTailTable> build(const TimeGrid& grid, double a);

  double a() const noexcept { return a_; }
  std::uint64_t size() const noexcept { return A_.size(); }
  double coefficient(std::uint64_t k) const;
  double bound(std::uint64_t k) const;

 private:
  double a_ = 1.0;
  std::vector<double> A_;
  std::vector<double> bound_;
};

struct NestedMcOptions {
  std::uint64_t inner_paths = 64;
  std::uint64_t horizon = 0;          // I_max (0 selects the grid end)
  std::uint64_t step_budget = 200000000;  // max outer k * inner * (I_max - k) steps
  unsigned workers = 1;
  double gamma = 1.0;                 // for the reported tail heuristic
  double alpha = 1.0;
  double rho_rate = 1.0;
};

struct MonteCarloMean {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

/// Monte Carlo estimate of P_{t_m, t_n} f(x) from inner_paths sub-simulations
/// started at index m. Inner path j uses stream (seed, mix64(stream_id + j)).
MonteCarloMean ptf_nested_mc(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, std::uint64_t m,
                             std::uint64_t n, const State& x, const TestFunction& f, std::uint64_t inner_paths,
                             std::uint64_t seed, std::uint64_t stream_id, unsigned workers = 1);

struct Decomposition {
  std::uint64_t k = 0;
  std::uint64_t k_tilde = 0;
  double R = 0.0;
  double M_tilde = 0.0;
  double R_tilde = 0.0;
  double sum = 0.0;       // sum_{i<=k} tau_i (f(Y_i) - mu)
  double residual = 0.0;  // |R + M~ + R~ - sum|
};

/// Per-path record of the decomposition sum = R + M~ + R~. Attach to
/// simulate_path as an observer, then query.
class MartingaleLedger : public PathObserver {
 public:
  /// Closed-form mode: linear SODE of dimension 1, f = identity, mu = 0.
  MartingaleLedger(const TimeGrid& grid, const QuasiUniformIndex& index, const SodeModel& model,
                   const TestFunction& f, double mu, std::shared_ptr<const LinearTailTable> tails, State x);

  /// Nested Monte Carlo mode.
  MartingaleLedger(const TimeGrid& grid, const QuasiUniformIndex& index, Model model, SchemeSpec scheme,
                   const TestFunction& f, double mu, NestedMcOptions options, State x, std::uint64_t seed,
                   std::uint64_t path);

  LedgerMode mode() const noexcept { return mode_; }

  void on_step(const StepView& view) override;

  /// Last recorded step index.
  std::uint64_t recorded() const noexcept { return f_.size() - 1; }

  /// T(k, y) = sum_{i>=k} tau_i (P_{t_k,t_i} f(y) - mu); x * A_k in closed form.
  double tail_weighted_mean(std::uint64_t k, const State& y) const;
  /// Closed-form mode only.
  double tail_weighted_mean_linear(std::uint64_t k, double x) const;
  /// Reported truncation/rounding bound of T at index k.
  double tail_bound(std::uint64_t k) const;

  /// Z_k for 1 <= k <= recorded().
  double martingale_increment(std::uint64_t k) const;
  /// Z_k from the split tau_{k-1}(f(Y_{k-1}) - mu) + T(k, Y_k) - T(k-1, Y_{k-1}).
  double martingale_increment_split(std::uint64_t k) const;

  /// Z~_k = sum_{j=n_(k-1)+1}^{n_(k)} Z_j.
  double block_increment(std::uint64_t k) const;

  Decomposition decomposition(std::uint64_t k) const;

  /// (1 / t~_N) sum_{k<=N} |Z~_k|^2.
  double qv_average(std::uint64_t N) const;

  /// M~_k for k = 0..N.
  std::vector<double> tilde_martingale(std::uint64_t N) const;

  double observed(std::uint64_t k) const { return f_.at(k); }
  const State& state(std::uint64_t k) const { return y_.at(k); }
  double noise(std::uint64_t k) const { return dW_.at(k); }

 private:
  void require_recorded(std::uint64_t k) const;
  void require_block(std::uint64_t n) const;
  double z_nested(std::uint64_t k) const;
  double partial_sum(std::uint64_t k) const;

  const TimeGrid* grid_;
  const QuasiUniformIndex* index_;
  LedgerMode mode_;
  std::optional<Model> model_;
  SchemeSpec scheme_;
  TestFunction fn_;
  double mu_;
  double a_ = 1.0;
  double sigma_ = 1.0;
  std::shared_ptr<const LinearTailTable> tails_;
  NestedMcOptions nested_;
  std::uint64_t seed_ = 0;
  std::uint64_t path_ = 0;
  State x_;

  std::vector<double> f_;                 // f(Y_k); index 0 is f(x)
  std::vector<State> y_;                  // Y_k (nested mode only; closed form keeps y in f_)
  std::vector<double> dW_;                // Delta W_{k-1}, first component; index 0 unused
  std::vector<CompensatedSum> S_;         // sum_{i<=k} tau_i (f - mu)
  std::vector<CompensatedSum> M_;         // sum_{j<=k} Z_j (closed form)
  mutable std::vector<double> t_cache_;   // nested mode: memoized T(k, Y_k)
  mutable std::vector<bool> t_known_;
};

/// Lambda_N(t): piecewise-linear interpolation of M~_k / sqrt(2 v^2 t~_N log log(v^2 t~_N))
/// at clock t~_k / t~_N, k = 0..N.
double strassen_functional(std::span<const double> m_tilde, double v_hat, std::span<const double> t_tilde,
                           std::uint64_t N, double t);

}  // namespace lilsim
