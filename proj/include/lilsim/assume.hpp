#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lilsim/grid.hpp"
#include "lilsim/integrate.hpp"
#include "lilsim/model.hpp"

namespace lilsim {

enum class Verdict { pass, fail, undecided };
const char* to_string(Verdict v) noexcept;

struct ConditionEntry {
  std::string name;
  Verdict verdict = Verdict::undecided;
  std::string witness;  // the evaluated inequality, partial sum or bound
  std::string detail;
  double value = 0.0;   // numeric witness (left-hand side or bound)

  friend bool operator==(const ConditionEntry&, const ConditionEntry&) = default;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;

  bool all_pass() const noexcept;
  /// Throws UsageError if absent.
  const ConditionEntry& at(const std::string& name) const;
  void append(const ConditionReport& other);

  friend bool operator==(const ConditionReport&, const ConditionReport&) = default;
};

/// Exponents of the moment, contraction, regularity and convergence
/// assumptions together with the class parameters (p, gamma).
struct ExponentParams {
  double r = 100.0;
  double r_tilde = 1.0;
  double q = 100.0;
  double q_tilde = 1.0;
  double beta = 0.0;
  double kappa = 0.0;
  double gamma1 = 1.0;
  double gamma = 1.0;
  double l = 1.0;
  double l_tilde = 0.5;
  double alpha = 1.0;
  double p = 1.0;

  /// (1 + beta) v r~ v q~.
  double d_tilde() const noexcept;
  /// p/2 + p q~/2 + gamma (d~ v kappa).
  double p_tilde_F() const noexcept;

  /// Throws ConfigError naming the violated range.
  void validate() const;
};

enum class ConstraintContext { prop2_2, thm3_1, prop4_3, prop4_4 };
const char* to_string(ConstraintContext c) noexcept;
ConstraintContext constraint_context_from_string(const std::string& name);

ConditionReport check_exponent_constraints(const ExponentParams& params, ConstraintContext context);

/// Largest gamma on the grid {0.05, 0.10, ..., 1} (within [gamma1, 1]) for
/// which every constraint of the context holds. A heuristic search.
std::optional<double> largest_feasible_gamma(const ExponentParams& params, ConstraintContext context);

/// Decay law of rho or rho^tau.
struct RhoLaw {
  enum class Kind { exponential, power, custom };
  Kind kind = Kind::exponential;
  double rate = 1.0;  // exp(-rate t), or (1 + t)^-rate
  std::function<double(double)> custom;

  static RhoLaw exponential(double rate) { return {Kind::exponential, rate, {}}; }
  static RhoLaw power(double exponent) { return {Kind::power, exponent, {}}; }

  double operator()(double t) const;
  std::string describe() const;
};

struct StepConditionInputs {
  StepSpec spec;
  double gamma = 1.0;
  double alpha = 1.0;
  double l_tilde = 0.5;
  double gamma1 = 1.0;
  RhoLaw rho = RhoLaw::exponential(1.0);
  RhoLaw rho_tau = RhoLaw::exponential(1.0);
  std::uint64_t horizon = 1000000;
};

/// Conditions (i)-(iv) on the steps plus the summability of rho^{gamma1}.
/// Entry names: "step_i", "step_ii", "step_iii", "step_iv", "rho_summable".
ConditionReport check_step_conditions(const StepConditionInputs& in);

struct MomentCheckpoint {
  std::uint64_t n = 0;
  double t = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
};

struct MomentScan {
  double order = 2.0;
  double sup = 0.0;          // max over checkpoints of the mean
  double sup_stderr = 0.0;   // standard error at the maximizing checkpoint
  std::vector<MomentCheckpoint> checkpoints;
  bool diverged = false;     // some path produced a non-finite or overflowing state
};

struct AuditOptions {
  std::uint64_t paths = 200;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  double checkpoint_ratio = 1.25;  // geometric in step index
};

/// Monte Carlo sup_{k >= m} E|Y_{t_m, t_k}^x|^order over geometric checkpoints.
/// Orders above declared_q raise ConfigError.
std::vector<MomentScan> moment_scan(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid,
                                    const std::vector<double>& orders, std::uint64_t m, std::uint64_t horizon,
                                    const State& x, const AuditOptions& options,
                                    double declared_q = std::numeric_limits<double>::infinity());

struct ContractionFit {
  double rate = 0.0;       // lambda with E|dY|^2 ~ exp(-2 lambda (t - t_m))
  double stderr_rate = 0.0;
  bool degenerate = false;
  std::vector<std::uint64_t> n;
  std::vector<double> t;             // t_n - t_m
  std::vector<double> mean_sq_diff;  // E|Y^x - Y^y|^2
};

/// Synchronous coupling of paths from x and y started at index m.
ContractionFit contraction_fit(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, const State& x,
                               const State& y, std::uint64_t m, std::uint64_t horizon, const AuditOptions& options);

struct StrongLevel {
  std::uint64_t n = 0;
  double tau = 0.0;
  double mse = 0.0;
  double stderr_mse = 0.0;
};

struct StrongOrderFit {
  bool exact = false;       // the scheme is the exact sampler: error identically 0
  std::string reference;    // "exact_ou" or "step_halving"
  double alpha = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<StrongLevel> levels;
};

/// Regresses log E|X_{t_n} - Y_{t_n}|^2 on log tau_n over the levels by
/// weighted least squares and returns alpha = slope / 2 with a 95% interval.
/// Linear models couple BEM with the exact transition on shared Brownian
/// increments; other SODEs compare against the same scheme on the
/// step-halved grid.
StrongOrderFit strong_order_fit(const SodeModel& model, const SchemeSpec& scheme, const StepSpec& steps,
                                const std::vector<std::uint64_t>& levels, const AuditOptions& options);

}  // namespace lilsim
