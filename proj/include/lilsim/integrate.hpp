#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lilsim/grid.hpp"
#include "lilsim/model.hpp"
#include "lilsim/rng.hpp"

namespace lilsim {

enum class SchemeKind { bem, exp_euler, exact_ou, em_baseline };

const char* to_string(SchemeKind kind) noexcept;
SchemeKind scheme_kind_from_string(const std::string& name);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::bem;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;

  void validate() const;
  friend bool operator==(const SchemeSpec&, const SchemeSpec&) = default;
};

/// Outcome of one implicit solve.
struct BemSolveInfo {
  int iterations = 0;
  double residual = 0.0;    // |G| / (1 + |rhs| + tau |b(y')|)
  bool bisection = false;   // scalar fallback was used
  bool nonmonotone = false; // I - tau Db(y') not positive at the root
};

/// Solves y' - tau b(y') = y + sigma(y) dW. Linear models use the closed form
/// (y + sigma dW) / (1 + a tau); otherwise damped Newton, with a bracketing
/// bisection fallback in dimension one.
State bem_step(const SodeModel& model, std::span<const double> y, double tau, std::span<const double> dW,
               const SchemeSpec& scheme = {}, BemSolveInfo* info = nullptr);

/// y' - tau b(y') = rhs.
void bem_solve(const SodeModel& model, std::span<const double> rhs, double tau, const SchemeSpec& scheme,
               std::span<double> out, BemSolveInfo* info = nullptr);

/// Explicit Euler-Maruyama; a negative control, not claimed to be stable.
State em_step(const SodeModel& model, std::span<const double> y, double tau, std::span<const double> dW);

/// Per mode: exp(-lambda_j tau) (y_j + F(y)_j tau + dW_j).
State exp_euler_step(const SpectralSpdeModel& model, std::span<const double> y, double tau,
                     std::span<const double> dW);

/// Exact Ornstein-Uhlenbeck transition over tau driven by a standard normal xi.
double exact_ou_step(double a, double sigma, double y, double tau, double xi);

using Model = std::variant<SodeModel, SpectralSpdeModel>;

std::size_t state_dimension(const Model& model);

/// Normal draws consumed per step (counter stride within a path's stream).
std::size_t noise_stride(const Model& model, const SchemeSpec& scheme);

/// Checks that the scheme applies to the model.
void check_compatible(const Model& model, const SchemeSpec& scheme);

/// What an observer sees after step n (from t_{n-1} to t_n).
struct StepView {
  std::uint64_t n = 0;
  double t = 0.0;
  double tau = 0.0;
  std::span<const double> prev;   // Y_{t_{n-1}}
  std::span<const double> state;  // Y_{t_n}
  std::span<const double> noise;  // Delta W_{n-1} (already scaled by the step)
};

/// Per-path observer. on_step runs after every step; on_checkpoint runs at
/// the declared (increasing) checkpoint indices and produces a record.
class PathObserver {
 public:
  virtual ~PathObserver() = default;
  virtual void on_step(const StepView&) {}
  virtual std::span<const std::uint64_t> checkpoints() const { return {}; }
  virtual void on_checkpoint(const StepView&) {}
};

struct ObservationRecord {
  std::size_t observer = 0;
  std::uint64_t n = 0;
  double t = 0.0;
  State state;

  friend bool operator==(const ObservationRecord&, const ObservationRecord&) = default;
};

/// Y at step n of one path. t always comes from the grid.
struct PathState {
  State state;
  std::uint64_t n = 0;
  double t = 0.0;
  NormalStream stream;
};

struct PathResult {
  PathState final;
  std::vector<ObservationRecord> records;
};

/// Walks steps start+1..end (end = 0 means the grid end) from state x at
/// index start. Step n consumes the draws (path, n * stride + j).
PathResult simulate_path(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, const State& x,
                         NormalStream stream, std::span<PathObserver* const> observers = {},
                         std::uint64_t start = 0, std::uint64_t end = 0);

}  // namespace lilsim
