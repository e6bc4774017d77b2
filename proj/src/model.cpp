#include "lilsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "lilsim/errors.hpp"

namespace lilsim {
namespace {

double norm(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  return std::sqrt(s);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

SodeModel SodeModel::ornstein_uhlenbeck(double a, double sigma, std::size_t dim) {
  SodeModel m;
  m.name = "ou";
  m.dim = dim;
  m.noise_dim = dim;
  m.drift = [a](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -a * x[i];
  };
  m.diffusion = [sigma, dim](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = sigma;
  };
  m.drift_jacobian = [a, dim](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = -a;
  };
  m.constants.c1 = 0.0;
  m.constants.c2 = std::fabs(sigma) * std::sqrt(static_cast<double>(dim));
  m.constants.c3 = a;
  m.constants.c4 = a;
  m.constants.qbar = 1.0;
  m.linear = LinearOu{a, sigma};
  return m;
}

SodeModel SodeModel::polynomial(double a, double c, double sigma) {
  SodeModel m;
  m.name = "polynomial";
  m.drift = [a, c](std::span<const double> x, std::span<double> out) { out[0] = -a * x[0] - c * x[0] * x[0] * x[0]; };
  m.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
  m.drift_jacobian = [a, c](std::span<const double> x, std::span<double> out) { out[0] = -a - 3.0 * c * x[0] * x[0]; };
  m.constants.c1 = 0.0;
  m.constants.c2 = std::fabs(sigma);
  m.constants.c3 = a;
  m.constants.c4 = std::max(a, 1.5 * c);
  m.constants.qbar = c != 0.0 ? 3.0 : 1.0;
  return m;
}

void SodeModel::validate() const {
  if (dim < 1 || noise_dim < 1) throw ConfigError("model dimension must be >= 1");
  if (!drift || !diffusion) throw ConfigError("model needs drift and diffusion callbacks");
  const auto& c = constants;
  if (!(c.c3 > 7.5 * c.c1 * c.c1)) {
    throw ConfigError("model.c3 = " + fmt(c.c3) + " must exceed 15/2 c1^2 = " + fmt(7.5 * c.c1 * c.c1));
  }
  if (!(c.c5() <= 13.0)) throw ConfigError("derived c5 = 2 c3 - 15 c1^2 = " + fmt(c.c5()) + " must be <= 13");
  if (c.c1 < 0.0 || c.c2 < 0.0 || c.c4 < 0.0) throw ConfigError("model.c1, model.c2, model.c4 must be >= 0");
  if (!(c.qbar >= 1.0)) throw ConfigError("model.qbar must be >= 1");
  if (!(c.c6 > 0.0)) throw ConfigError("model.c6 must be > 0");
  if (linear && !(linear->a > 0.0)) throw ConfigError("linear model requires a > 0, got " + fmt(linear->a));
}

double NoiseLaw::weight(std::size_t j) const noexcept {
  return kind == NoiseLawKind::white ? 1.0 : std::pow(static_cast<double>(j), -exponent);
}

Nonlinearity Nonlinearity::linear(double slope) {
  Nonlinearity n;
  n.kind = NonlinearityKind::linear;
  n.slope = slope;
  n.lipschitz = std::fabs(slope);
  return n;
}

Nonlinearity Nonlinearity::nemytskii(std::string name, std::function<double(double)> phi, double lipschitz) {
  Nonlinearity n;
  n.kind = NonlinearityKind::nemytskii;
  n.name = std::move(name);
  n.phi = std::move(phi);
  n.lipschitz = lipschitz;
  return n;
}

Nonlinearity Nonlinearity::nemytskii(const std::string& name) {
  if (name == "sin") return nemytskii(name, [](double v) { return std::sin(v); }, 1.0);
  if (name == "tanh") return nemytskii(name, [](double v) { return std::tanh(v); }, 1.0);
  if (name == "neg_tanh") return nemytskii(name, [](double v) { return -std::tanh(v); }, 1.0);
  if (name == "linear2") return nemytskii(name, [](double v) { return 2.0 * v; }, 2.0);
  throw ConfigError("unknown Nemytskii map '" + name + "' (expected sin, tanh, neg_tanh or linear2)");
}

double SpectralSpdeModel::eigenvalue(std::size_t j) const noexcept {
  const double jd = static_cast<double>(j);
  return jd * jd * std::numbers::pi * std::numbers::pi;
}

std::size_t SpectralSpdeModel::quadrature_mesh() const noexcept {
  return mesh != 0 ? mesh : std::max<std::size_t>(4 * modes, 1024);
}

void SpectralSpdeModel::validate() const {
  if (modes < 1) throw ConfigError("spde.modes must be >= 1");
  if (!(beta1 > 0.0 && beta1 <= 1.0)) throw ConfigError("spde.beta1 must lie in (0,1], got " + fmt(beta1));
  if (noise.kind == NoiseLawKind::power && !std::isfinite(noise.exponent)) {
    throw ConfigError("spde.q_law exponent must be finite");
  }
  if (!(c9 < eigenvalue(1))) {
    throw ConfigError("model.c9 = " + fmt(c9) + " must stay below lambda_1 = pi^2");
  }
  if (F.kind == NonlinearityKind::nemytskii && !F.phi) throw ConfigError("Nemytskii nonlinearity without a map");
  if (quadrature_mesh() <= modes) throw ConfigError("quadrature mesh must exceed the mode count");
}

TestFunction TestFunction::identity() {
  TestFunction f;
  f.name = "identity";
  f.eval = [](std::span<const double> x) { return x[0]; };
  f.p = 2.0;
  f.gamma = 1.0;
  return f;
}

TestFunction TestFunction::coordinate(std::size_t i) {
  TestFunction f;
  f.name = "coordinate:" + std::to_string(i);
  f.eval = [i](std::span<const double> x) { return x[i]; };
  f.p = 2.0;
  f.gamma = 1.0;
  return f;
}

TestFunction TestFunction::saturating(std::vector<double> weights) {
  TestFunction f;
  f.name = "tanh";
  f.eval = [w = std::move(weights)](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size() && i < x.size(); ++i) s += w[i] * x[i];
    return std::tanh(s);
  };
  f.p = 1.0;
  f.gamma = 1.0;
  return f;
}

TestFunction TestFunction::capped_square_norm(double cap) {
  TestFunction f;
  f.name = "capped_square";
  f.eval = [cap](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::min(s, cap);
  };
  f.p = 1.0;
  f.gamma = 1.0;
  return f;
}

void TestFunction::validate() const {
  if (!eval) throw ConfigError("test function has no evaluation callback");
  if (!(p >= 1.0)) throw ConfigError("f.p must be >= 1, got " + fmt(p));
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("f.gamma must lie in (0,1], got " + fmt(gamma));
}

double quasi_metric(std::span<const double> u1, std::span<const double> u2, double p, double gamma) {
  if (u1.size() != u2.size()) {
    throw DomainError("quasi_metric: dimension mismatch (" + std::to_string(u1.size()) + " vs " +
                      std::to_string(u2.size()) + ")");
  }
  double diff2 = 0.0;
  for (std::size_t i = 0; i < u1.size(); ++i) diff2 += (u1[i] - u2[i]) * (u1[i] - u2[i]);
  const double dist = std::sqrt(diff2);
  const double near = std::min(1.0, std::pow(dist, gamma));
  // Summed in a fixed order so that d(u1, u2) == d(u2, u1) bit for bit.
  const double w1 = std::pow(norm(u1), p);
  const double w2 = std::pow(norm(u2), p);
  const double weight = std::sqrt(1.0 + std::min(w1, w2) + std::max(w1, w2));
  return near * weight;
}

double holder_norm_estimate(const TestFunction& f, double p, double gamma,
                            const std::function<State(std::uint64_t)>& sampler, std::uint64_t n_pairs) {
  if (n_pairs < 1) throw DomainError("holder_norm_estimate needs n_pairs >= 1");
  double growth = 0.0;
  double modulus = 0.0;
  auto checked = [](const State& u) {
    for (double v : u) {
      if (!std::isfinite(v)) throw NumericError("sampler produced a non-finite state");
    }
    return u;
  };
  for (std::uint64_t i = 0; i < n_pairs; ++i) {
    const State u1 = checked(sampler(2 * i));
    const State u2 = checked(sampler(2 * i + 1));
    const double f1 = f(u1);
    const double f2 = f(u2);
    growth = std::max({growth, std::fabs(f1) / (1.0 + std::pow(norm(u1), p / 2.0)),
                       std::fabs(f2) / (1.0 + std::pow(norm(u2), p / 2.0))});
    const double d = quasi_metric(u1, u2, p, gamma);
    if (d > 0.0) modulus = std::max(modulus, std::fabs(f1 - f2) / d);
  }
  return growth + modulus;
}

double holder_norm_estimate(const TestFunction& f, const std::function<State(std::uint64_t)>& sampler,
                            std::uint64_t n_pairs) {
  return holder_norm_estimate(f, f.p, f.gamma, sampler, n_pairs);
}

TraceNorm q_trace_norm(const SpectralSpdeModel& model) {
  if (model.modes < 1) throw ConfigError("spde.modes must be >= 1");
  TraceNorm out;
  for (std::size_t j = 1; j <= model.modes; ++j) {
    out.partial += std::pow(model.eigenvalue(j), model.beta1 - 1.0) * model.q(j);
  }
  // Summand = pi^{2(beta1-1)} j^{-g} with g the decay exponent.
  const double q_exponent = model.noise.kind == NoiseLawKind::white ? 0.0 : model.noise.exponent;
  const double g = q_exponent - 2.0 * (model.beta1 - 1.0);
  const double scale = std::pow(std::numbers::pi, 2.0 * (model.beta1 - 1.0));
  if (g > 1.0) {
    // Midpoint-corrected integral test: sum_{j>J} j^-g ~ int_{J+1/2}^inf x^-g dx.
    const double edge = static_cast<double>(model.modes) + 0.5;
    out.tail = scale * std::pow(edge, 1.0 - g) / (g - 1.0);
    out.finite = true;
  } else {
    out.tail = std::numeric_limits<double>::infinity();
    out.finite = false;
  }
  out.value = out.partial + out.tail;
  return out;
}

SineProjector::SineProjector(std::size_t modes, std::size_t mesh) : modes_(modes), mesh_(mesh) {
  if (mesh <= modes) throw ConfigError("quadrature mesh must exceed the mode count");
  table_.resize((mesh - 1) * modes);
  const double h = 1.0 / static_cast<double>(mesh);
  for (std::size_t i = 1; i < mesh; ++i) {
    for (std::size_t j = 1; j <= modes; ++j) {
      // sin(j pi i / M) with the argument reduced modulo 2M for accuracy.
      const std::size_t r = (j * i) % (2 * mesh);
      table_[(i - 1) * modes + (j - 1)] = std::numbers::sqrt2 * std::sin(std::numbers::pi * static_cast<double>(r) * h);
    }
  }
}

void SineProjector::synthesize(std::span<const double> coeffs, std::span<double> nodal) const {
  for (std::size_t i = 0; i + 1 < mesh_; ++i) {
    const double* row = &table_[i * modes_];
    double s = 0.0;
    for (std::size_t j = 0; j < modes_; ++j) s += coeffs[j] * row[j];
    nodal[i] = s;
  }
}

void SineProjector::project(std::span<const double> nodal, std::span<double> coeffs) const {
  std::fill(coeffs.begin(), coeffs.begin() + static_cast<std::ptrdiff_t>(modes_), 0.0);
  for (std::size_t i = 0; i + 1 < mesh_; ++i) {
    const double* row = &table_[i * modes_];
    const double v = nodal[i];
    for (std::size_t j = 0; j < modes_; ++j) coeffs[j] += v * row[j];
  }
  const double h = 1.0 / static_cast<double>(mesh_);
  for (std::size_t j = 0; j < modes_; ++j) coeffs[j] *= h;
}

State nemytskii_apply(const SpectralSpdeModel& model, std::span<const double> coeffs) {
  if (model.F.kind != NonlinearityKind::nemytskii || !model.F.phi) {
    throw UsageError("nemytskii_apply requires a Nemytskii nonlinearity");
  }
  if (coeffs.size() != model.modes) {
    throw DomainError("nemytskii_apply: expected " + std::to_string(model.modes) + " coefficients, got " +
                      std::to_string(coeffs.size()));
  }
  const SineProjector proj(model.modes, model.quadrature_mesh());
  std::vector<double> nodal(proj.mesh() - 1);
  proj.synthesize(coeffs, nodal);
  for (double& v : nodal) {
    v = model.F.phi(v);
    if (!std::isfinite(v)) throw NumericError("Nemytskii map produced a non-finite nodal value");
  }
  State out(model.modes);
  proj.project(nodal, out);
  return out;
}

}  // namespace lilsim
