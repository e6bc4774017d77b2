#include "lilsim/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "lilsim/errors.hpp"

namespace lilsim {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Solves A x = b in place (A row-major n x n) by partial pivoting. Returns
// false for a singular matrix.
bool solve_dense(std::vector<double>& A, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(A[r * n + col]) > std::fabs(A[piv * n + col])) piv = r;
    }
    if (A[piv * n + col] == 0.0) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(A[piv * n + c], A[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = A[r * n + col] / A[col * n + col];
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= m * A[col * n + c];
      b[r] -= m * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= A[i * n + c] * b[c];
    b[i] = s / A[i * n + i];
  }
  return true;
}

struct Residual {
  std::vector<double> g;
  double abs = 0.0;
  double scaled = 0.0;
};

void residual(const SodeModel& model, std::span<const double> y, std::span<const double> rhs, double tau,
              std::vector<double>& drift, Residual& out) {
  const std::size_t d = y.size();
  model.drift(y, drift);
  out.g.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.g[i] = y[i] - tau * drift[i] - rhs[i];
  out.abs = norm(out.g);
  out.scaled = out.abs / (1.0 + norm(rhs) + tau * norm(drift));
}

void jacobian(const SodeModel& model, std::span<const double> y, std::vector<double>& J) {
  const std::size_t d = y.size();
  J.assign(d * d, 0.0);
  if (model.drift_jacobian) {
    model.drift_jacobian(y, J);
    return;
  }
  const double eps3 = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<double> yp(y.begin(), y.end()), ym(y.begin(), y.end()), bp(d), bm(d);
  for (std::size_t c = 0; c < d; ++c) {
    const double h = eps3 * (1.0 + std::fabs(y[c]));
    yp[c] = y[c] + h;
    ym[c] = y[c] - h;
    model.drift(yp, bp);
    model.drift(ym, bm);
    for (std::size_t r = 0; r < d; ++r) J[r * d + c] = (bp[r] - bm[r]) / (2.0 * h);
    yp[c] = y[c];
    ym[c] = y[c];
  }
}

// Scalar fallback: G(y) = y - tau b(y) - rhs is increasing for monotone drift.
bool bisect_scalar(const SodeModel& model, double rhs, double tau, const SchemeSpec& scheme, double& root,
                   BemSolveInfo& info) {
  std::vector<double> drift(1), y(1);
  auto G = [&](double v) {
    y[0] = v;
    model.drift(y, drift);
    return v - tau * drift[0] - rhs;
  };
  double lo = rhs, hi = rhs;
  double width = 1.0 + std::fabs(rhs);
  int expand = 0;
  while (G(lo) > 0.0 && expand < 200) {
    lo -= width;
    width *= 2.0;
    ++expand;
  }
  width = 1.0 + std::fabs(rhs);
  while (G(hi) < 0.0 && expand < 400) {
    hi += width;
    width *= 2.0;
    ++expand;
  }
  if (!(G(lo) <= 0.0 && G(hi) >= 0.0)) return false;
  std::vector<double> rhs_v{rhs};
  Residual res;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    y[0] = mid;
    residual(model, y, rhs_v, tau, drift, res);
    info.residual = res.scaled;
    ++info.iterations;
    if (res.scaled <= scheme.newton_tol || mid == lo || mid == hi) {
      root = mid;
      return res.scaled <= scheme.newton_tol;
    }
    if (res.g[0] > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return false;
}

}  // namespace

const char* to_string(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::bem:
      return "bem";
    case SchemeKind::exp_euler:
      return "exp_euler";
    case SchemeKind::exact_ou:
      return "exact_ou";
    case SchemeKind::em_baseline:
      return "em_baseline";
  }
  return "?";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  if (name == "bem") return SchemeKind::bem;
  if (name == "exp_euler") return SchemeKind::exp_euler;
  if (name == "exact_ou") return SchemeKind::exact_ou;
  if (name == "em_baseline") return SchemeKind::em_baseline;
  throw ConfigError("unknown scheme '" + name + "' (expected bem, exp_euler, exact_ou or em_baseline)");
}

void SchemeSpec::validate() const {
  if (!(newton_tol > 0.0)) throw ConfigError("scheme.newton_tol must be > 0");
  if (newton_max_iter < 1) throw ConfigError("scheme.newton_max_iter must be >= 1");
}

void bem_solve(const SodeModel& model, std::span<const double> rhs, double tau, const SchemeSpec& scheme,
               std::span<double> out, BemSolveInfo* info) {
  const std::size_t d = rhs.size();
  BemSolveInfo local;
  BemSolveInfo& inf = info ? *info : local;
  inf = {};
  if (model.linear) {
    const double denom = 1.0 + model.linear->a * tau;
    for (std::size_t i = 0; i < d; ++i) out[i] = rhs[i] / denom;
    return;
  }

  std::vector<double> y(rhs.begin(), rhs.end()), drift(d), J, trial(d);
  Residual res, res_trial;
  residual(model, y, rhs, tau, drift, res);
  for (int it = 0; it < scheme.newton_max_iter && std::isfinite(res.abs); ++it) {
    inf.iterations = it;
    inf.residual = res.scaled;
    if (res.scaled <= scheme.newton_tol) break;
    jacobian(model, y, J);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) J[r * d + c] = (r == c ? 1.0 : 0.0) - tau * J[r * d + c];
    }
    std::vector<double> delta(res.g.size());
    for (std::size_t i = 0; i < d; ++i) delta[i] = -res.g[i];
    if (!solve_dense(J, delta, d)) break;
    double lambda = 1.0;
    for (;;) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = y[i] + lambda * delta[i];
      residual(model, trial, rhs, tau, drift, res_trial);
      if ((std::isfinite(res_trial.abs) && res_trial.abs <= (1.0 - 1e-4 * lambda) * res.abs) || lambda < 1e-6) break;
      lambda *= 0.5;
    }
    y = trial;
    res = res_trial;
    inf.iterations = it + 1;
    inf.residual = res.scaled;
  }

  if (!(res.scaled <= scheme.newton_tol)) {
    double root = 0.0;
    if (d == 1 && bisect_scalar(model, rhs[0], tau, scheme, root, inf)) {
      inf.bisection = true;
      y[0] = root;
    } else {
      throw StepError("implicit solve did not reach tolerance " + std::to_string(scheme.newton_tol) +
                          " (scaled residual " + std::to_string(inf.residual) + ")",
                      0, inf.residual);
    }
  }

  jacobian(model, y, J);
  if (d == 1) {
    inf.nonmonotone = !(1.0 - tau * J[0] > 0.0);
  }
  std::copy(y.begin(), y.end(), out.begin());
}

State bem_step(const SodeModel& model, std::span<const double> y, double tau, std::span<const double> dW,
               const SchemeSpec& scheme, BemSolveInfo* info) {
  const std::size_t d = model.dim;
  const std::size_t m = model.noise_dim;
  if (y.size() != d || dW.size() != m) throw DomainError("bem_step: state or noise dimension mismatch");
  std::vector<double> sig(d * m);
  model.diffusion(y, sig);
  State rhs(y.begin(), y.end());
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < m; ++c) rhs[r] += sig[r * m + c] * dW[c];
  }
  State out(d);
  bem_solve(model, rhs, tau, scheme, out, info);
  return out;
}

State em_step(const SodeModel& model, std::span<const double> y, double tau, std::span<const double> dW) {
  const std::size_t d = model.dim;
  const std::size_t m = model.noise_dim;
  if (y.size() != d || dW.size() != m) throw DomainError("em_step: state or noise dimension mismatch");
  std::vector<double> sig(d * m), drift(d);
  model.diffusion(y, sig);
  model.drift(y, drift);
  State out(y.begin(), y.end());
  for (std::size_t r = 0; r < d; ++r) {
    out[r] += tau * drift[r];
    for (std::size_t c = 0; c < m; ++c) out[r] += sig[r * m + c] * dW[c];
  }
  return out;
}

State exp_euler_step(const SpectralSpdeModel& model, std::span<const double> y, double tau,
                     std::span<const double> dW) {
  const std::size_t J = model.modes;
  if (y.size() != J || dW.size() != J) throw DomainError("exp_euler_step: mode count mismatch");
  State drift(J, 0.0);
  switch (model.F.kind) {
    case NonlinearityKind::zero:
      break;
    case NonlinearityKind::linear:
      for (std::size_t j = 0; j < J; ++j) drift[j] = model.F.slope * y[j];
      break;
    case NonlinearityKind::nemytskii:
      drift = nemytskii_apply(model, y);
      break;
  }
  State out(J);
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = std::exp(-model.eigenvalue(j + 1) * tau) * (y[j] + drift[j] * tau + dW[j]);
    if (!std::isfinite(out[j])) throw NumericError("exp_euler_step produced a non-finite mode value");
  }
  return out;
}

double exact_ou_step(double a, double sigma, double y, double tau, double xi) {
  if (!(a > 0.0)) throw DomainError("exact_ou_step requires a > 0");
  if (!(tau > 0.0)) throw DomainError("exact_ou_step requires tau > 0");
  const double decay = std::exp(-a * tau);
  const double sd = sigma * std::sqrt(-std::expm1(-2.0 * a * tau) / (2.0 * a));
  return y * decay + sd * xi;
}

std::size_t state_dimension(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SodeModel>) {
          return m.dim;
        } else {
          return m.modes;
        }
      },
      model);
}

std::size_t noise_stride(const Model& model, const SchemeSpec& scheme) {
  if (const auto* sode = std::get_if<SodeModel>(&model)) {
    return scheme.kind == SchemeKind::exact_ou ? sode->dim : sode->noise_dim;
  }
  return std::get<SpectralSpdeModel>(model).modes;
}

void check_compatible(const Model& model, const SchemeSpec& scheme) {
  scheme.validate();
  const bool sode = std::holds_alternative<SodeModel>(model);
  switch (scheme.kind) {
    case SchemeKind::bem:
    case SchemeKind::em_baseline:
      if (!sode) throw ConfigError(std::string("scheme ") + to_string(scheme.kind) + " needs an SODE model");
      break;
    case SchemeKind::exact_ou:
      if (!sode || !std::get<SodeModel>(model).linear) {
        throw ConfigError("scheme exact_ou needs a linear Ornstein-Uhlenbeck model");
      }
      break;
    case SchemeKind::exp_euler:
      if (sode) throw ConfigError("scheme exp_euler needs a spectral SPDE model");
      break;
  }
}

namespace {

// Advances one path by one step; owns all scratch buffers.
class Stepper {
 public:
  Stepper(const Model& model, const SchemeSpec& scheme) : model_(model), scheme_(scheme) {
    check_compatible(model, scheme);
    dim_ = state_dimension(model);
    stride_ = noise_stride(model, scheme);
    noise_.resize(stride_);
    xi_.resize(stride_);
    if (const auto* spde = std::get_if<SpectralSpdeModel>(&model)) {
      spde_ = spde;
      sqrt_q_.resize(spde->modes);
      for (std::size_t j = 0; j < spde->modes; ++j) sqrt_q_[j] = std::sqrt(spde->q(j + 1));
      decay_.resize(spde->modes);
      drift_.resize(spde->modes);
      if (spde->F.kind == NonlinearityKind::nemytskii) {
        projector_.emplace(spde->modes, spde->quadrature_mesh());
        nodal_.resize(projector_->mesh() - 1);
      }
    } else {
      sode_ = &std::get<SodeModel>(model);
      sig_.resize(sode_->dim * sode_->noise_dim);
      rhs_.resize(sode_->dim);
      drift_.resize(sode_->dim);
    }
  }

  std::span<const double> noise() const { return noise_; }

  // state holds Y_{n-1} on entry and Y_n on exit.
  void advance(std::vector<double>& state, std::uint64_t n, double tau, NormalStream& stream) {
    const double sqrt_tau = std::sqrt(tau);
    for (std::size_t j = 0; j < stride_; ++j) xi_[j] = stream.draw(n, j, stride_);

    if (spde_) {
      spde_step(state, tau, sqrt_tau);
      return;
    }
    for (std::size_t j = 0; j < stride_; ++j) noise_[j] = sqrt_tau * xi_[j];
    switch (scheme_.kind) {
      case SchemeKind::exact_ou: {
        const auto& lin = *sode_->linear;
        for (std::size_t i = 0; i < dim_; ++i) state[i] = exact_ou_step(lin.a, lin.sigma, state[i], tau, xi_[i]);
        break;
      }
      case SchemeKind::bem: {
        if (sode_->linear) {
          const double denom = 1.0 + sode_->linear->a * tau;
          const double s = sode_->linear->sigma;
          for (std::size_t i = 0; i < dim_; ++i) state[i] = (state[i] + s * noise_[i]) / denom;
          break;
        }
        fill_rhs(state);
        try {
          bem_solve(*sode_, rhs_, tau, scheme_, state);
        } catch (const StepError& e) {
          throw StepError(std::string(e.what()) + " at step " + std::to_string(n), n, e.residual());
        }
        break;
      }
      case SchemeKind::em_baseline: {
        sode_->drift(state, drift_);
        fill_rhs(state);
        for (std::size_t i = 0; i < dim_; ++i) state[i] = rhs_[i] + tau * drift_[i];
        break;
      }
      case SchemeKind::exp_euler:
        break;
    }
  }

 private:
  void fill_rhs(std::span<const double> state) {
    const std::size_t m = sode_->noise_dim;
    sode_->diffusion(state, sig_);
    for (std::size_t r = 0; r < dim_; ++r) {
      double s = state[r];
      for (std::size_t c = 0; c < m; ++c) s += sig_[r * m + c] * noise_[c];
      rhs_[r] = s;
    }
  }

  void spde_step(std::vector<double>& state, double tau, double sqrt_tau) {
    const std::size_t J = spde_->modes;
    // exp(-j^2 pi^2 tau) via base^(j^2) = base^(j-1)^2 * base^(2j-1).
    const double base = std::exp(-std::numbers::pi * std::numbers::pi * tau);
    const double base2 = base * base;
    double odd = base;
    double r = 1.0;
    for (std::size_t j = 0; j < J; ++j) {
      r *= odd;
      odd *= base2;
      decay_[j] = r;
    }
    switch (spde_->F.kind) {
      case NonlinearityKind::zero:
        std::fill(drift_.begin(), drift_.end(), 0.0);
        break;
      case NonlinearityKind::linear:
        for (std::size_t j = 0; j < J; ++j) drift_[j] = spde_->F.slope * state[j];
        break;
      case NonlinearityKind::nemytskii:
        projector_->synthesize(state, nodal_);
        for (double& v : nodal_) v = spde_->F.phi(v);
        projector_->project(nodal_, drift_);
        break;
    }
    for (std::size_t j = 0; j < J; ++j) {
      noise_[j] = sqrt_q_[j] * sqrt_tau * xi_[j];
      state[j] = decay_[j] * (state[j] + drift_[j] * tau + noise_[j]);
    }
  }

  const Model& model_;
  SchemeSpec scheme_;
  std::size_t dim_ = 0;
  std::size_t stride_ = 0;
  const SodeModel* sode_ = nullptr;
  const SpectralSpdeModel* spde_ = nullptr;
  std::vector<double> noise_, xi_, sig_, rhs_, drift_, sqrt_q_, decay_, nodal_;
  std::optional<SineProjector> projector_;
};

}  // namespace

PathResult simulate_path(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, const State& x,
                         NormalStream stream, std::span<PathObserver* const> observers, std::uint64_t start,
                         std::uint64_t end) {
  if (end == 0) end = grid.n_max();
  if (start > end || end > grid.n_max()) {
    throw HorizonError("simulation range [" + std::to_string(start) + ", " + std::to_string(end) +
                       "] outside grid of " + std::to_string(grid.n_max()) + " steps");
  }
  if (x.size() != state_dimension(model)) throw DomainError("initial state has the wrong dimension");

  Stepper stepper(model, scheme);
  PathResult result;
  std::vector<double> state(x.begin(), x.end());
  std::vector<double> prev(state.size());

  // Next pending checkpoint per observer.
  std::vector<std::span<const std::uint64_t>> cps(observers.size());
  std::vector<std::size_t> cursor(observers.size(), 0);
  for (std::size_t o = 0; o < observers.size(); ++o) {
    cps[o] = observers[o]->checkpoints();
    if (!std::is_sorted(cps[o].begin(), cps[o].end())) {
      throw UsageError("observer checkpoints must be given in increasing order");
    }
    while (cursor[o] < cps[o].size() && cps[o][cursor[o]] <= start) ++cursor[o];
  }

  GridCursor gc = grid.cursor(start);
  while (gc.index() < end) {
    gc.advance();
    const std::uint64_t n = gc.index();
    std::copy(state.begin(), state.end(), prev.begin());
    stepper.advance(state, n, gc.step(), stream);
    const StepView view{n, gc.time(), gc.step(), prev, state, stepper.noise()};
    for (std::size_t o = 0; o < observers.size(); ++o) {
      observers[o]->on_step(view);
      if (cursor[o] < cps[o].size() && cps[o][cursor[o]] == n) {
        observers[o]->on_checkpoint(view);
        result.records.push_back({o, n, view.t, State(state.begin(), state.end())});
        ++cursor[o];
      }
    }
  }
  result.final.state = std::move(state);
  result.final.n = gc.index();
  result.final.t = gc.time();
  result.final.stream = stream;
  return result;
}

}  // namespace lilsim
