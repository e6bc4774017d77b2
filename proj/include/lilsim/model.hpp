#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lilsim {

/// Flat state vector: SODE components or spectral coefficients.
using State = std::vector<double>;

/// Callback writing a vector (drift, diffusion matrix, Jacobian) for a state.
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

/// Declared dissipativity constants of a SODE (user metadata, audited
/// empirically by the assume module rather than inferred).
struct SodeConstants {
  double c1 = 0.0;    // diffusion Lipschitz constant
  double c2 = 0.0;    // diffusion bound
  double c3 = 0.0;    // one-sided drift constant
  double c4 = 0.0;    // polynomial drift growth constant
  double qbar = 1.0;  // polynomial drift growth exponent
  double c6 = 1.0;    // free constant in the coercivity bound

  double c5() const noexcept { return 2.0 * c3 - 15.0 * c1 * c1; }
  double c7(double drift_at_origin) const noexcept {
    return drift_at_origin * drift_at_origin / c3 + c6 * c2 * c2;
  }
  /// Contraction rate of the backward Euler scheme with maximal step tau_bar.
  double c8(double tau_bar) const noexcept { return c5() / (1.0 + c5() * tau_bar); }

  friend bool operator==(const SodeConstants&, const SodeConstants&) = default;
};

/// b(x) = -a x with constant scalar diffusion sigma.
struct LinearOu {
  double a = 1.0;
  double sigma = 1.0;
};

struct SodeModel {
  std::string name;
  std::size_t dim = 1;
  std::size_t noise_dim = 1;
  VectorField drift;           // b: R^d -> R^d
  VectorField diffusion;       // sigma: R^d -> R^{d x m}, row-major
  VectorField drift_jacobian;  // optional d x d row-major; finite differences otherwise
  SodeConstants constants;
  std::optional<LinearOu> linear;

  /// dX = -a X dt + sigma dW in dimension `dim` (diagonal noise).
  static SodeModel ornstein_uhlenbeck(double a, double sigma, std::size_t dim = 1);

  /// Scalar dX = (-a X - c X^3) dt + sigma dW.
  static SodeModel polynomial(double a, double c, double sigma);

  /// Throws ConfigError unless c3 > 15/2 c1^2, c5 <= 13 and the linear flag is consistent.
  void validate() const;
};

enum class NoiseLawKind { power, white };

/// Covariance weights q_j = j^-exponent (power) or q_j = 1 (white).
struct NoiseLaw {
  NoiseLawKind kind = NoiseLawKind::power;
  double exponent = 2.0;

  double weight(std::size_t j) const noexcept;
  friend bool operator==(const NoiseLaw&, const NoiseLaw&) = default;
};

enum class NonlinearityKind { zero, linear, nemytskii };

struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::zero;
  double slope = 0.0;               // linear: F(u) = slope * u
  std::string name;                 // nemytskii: registry name
  std::function<double(double)> phi;
  double lipschitz = 0.0;

  static Nonlinearity zero() { return {}; }
  static Nonlinearity linear(double slope);
  /// Registered pointwise maps: "sin", "tanh", "neg_tanh", "linear2" (2v).
  static Nonlinearity nemytskii(const std::string& name);
  static Nonlinearity nemytskii(std::string name, std::function<double(double)> phi, double lipschitz);
};

/// Stochastic heat equation on (0,1) with Dirichlet boundary, truncated to
/// the first J sine modes: eigenvalues j^2 pi^2, commuting noise q_j.
struct SpectralSpdeModel {
  std::size_t modes = 64;
  double beta1 = 1.0;
  NoiseLaw noise;
  Nonlinearity F;
  double c9 = 0.0;         // one-sided constant of F, must stay below lambda_1
  std::size_t mesh = 0;    // Nemytskii quadrature mesh; 0 selects max(4J, 1024)

  double eigenvalue(std::size_t j) const noexcept;
  double q(std::size_t j) const noexcept { return noise.weight(j); }
  std::size_t quadrature_mesh() const noexcept;

  void validate() const;
};

/// Observable f with declared class C_{p,gamma}.
struct TestFunction {
  std::string name;
  std::function<double(std::span<const double>)> eval;
  double p = 2.0;
  double gamma = 1.0;
  std::optional<double> exact_mean;
  std::optional<double> exact_v;

  double operator()(std::span<const double> x) const { return eval(x); }

  /// x_0, class (2, 1).
  static TestFunction identity();
  /// x_i, class (2, 1).
  static TestFunction coordinate(std::size_t i);
  /// tanh(<w, x>), class (1, 1).
  static TestFunction saturating(std::vector<double> weights);
  /// min(|x|^2, cap), class (1, 1).
  static TestFunction capped_square_norm(double cap);

  void validate() const;
};

/// (1 ^ |u1-u2|^gamma) (1 + |u1|^p + |u2|^p)^{1/2}.
double quasi_metric(std::span<const double> u1, std::span<const double> u2, double p, double gamma);

/// Lower bound on the C_{p,gamma} norm from the sample stream
/// u_0, u_1, ... (pairs (u_{2i}, u_{2i+1})).
double holder_norm_estimate(const TestFunction& f, const std::function<State(std::uint64_t)>& sampler,
                            std::uint64_t n_pairs);

/// Same estimate with explicit class parameters (used to compare classes).
double holder_norm_estimate(const TestFunction& f, double p, double gamma,
                            const std::function<State(std::uint64_t)>& sampler, std::uint64_t n_pairs);

struct TraceNorm {
  double partial = 0.0;   // sum_{j<=J} lambda_j^{beta1-1} q_j
  double tail = 0.0;      // integral-test tail bound (infinite when divergent)
  double value = 0.0;     // partial + tail
  bool finite = true;
};

/// Trace condition |(-A)^{(beta1-1)/2} Q^{1/2}|_{HS}^2.
TraceNorm q_trace_norm(const SpectralSpdeModel& model);

/// Synthesis on a uniform mesh and sine projection of a pointwise map.
class SineProjector {
 public:
  SineProjector(std::size_t modes, std::size_t mesh);

  std::size_t modes() const noexcept { return modes_; }
  std::size_t mesh() const noexcept { return mesh_; }

  /// Nodal values u(x_i), i = 1..mesh-1, of sum_j c_j sqrt(2) sin(j pi x).
  void synthesize(std::span<const double> coeffs, std::span<double> nodal) const;
  /// Trapezoid projection onto the first J modes.
  void project(std::span<const double> nodal, std::span<double> coeffs) const;

 private:
  std::size_t modes_;
  std::size_t mesh_;
  std::vector<double> table_;  // (mesh-1) x modes, sqrt(2) sin(j pi i / mesh)
};

/// F(u) for a Nemytskii nonlinearity in spectral coordinates.
State nemytskii_apply(const SpectralSpdeModel& model, std::span<const double> coeffs);

}  // namespace lilsim
