#include "lilsim/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lilsim/errors.hpp"
#include "lilsim/lilstat.hpp"
#include "lilsim/parallel.hpp"
#include "lilsim/rng.hpp"

namespace lilsim {

const char* to_string(LedgerMode mode) noexcept {
  return mode == LedgerMode::closed_form_linear ? "closed_form_linear" : "nested_mc";
}

LedgerMode ledger_mode_from_string(const std::string& name) {
  if (name == "closed_form_linear") return LedgerMode::closed_form_linear;
  if (name == "nested_mc") return LedgerMode::nested_mc;
  throw ConfigError("unknown ledger mode '" + name + "' (expected closed_form_linear or nested_mc)");
}

std::shared_ptr<const LinearTailTable> LinearTailTable::build(const TimeGrid& grid, double a) {
  if (!(a > 0.0)) throw DomainError("tail coefficients need a > 0");
  auto table = std::make_shared<LinearTailTable>();
  table->a_ = a;
  const std::uint64_t n = grid.n_max();
  table->A_.resize(n + 1);
  table->bound_.resize(n + 1);
  const double inv_a = 1.0 / a;
  double A = grid.step(n) + inv_a;
  table->A_[n] = A;
  double tau_next = grid.step(n);
  for (std::uint64_t k = n; k-- > 0;) {
    const double tau = grid.step(k);
    A = tau + A / (1.0 + a * tau_next);
    table->A_[k] = A;
    tau_next = tau;
  }
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double closed = grid.step(k) + inv_a;
    table->bound_[k] = std::fabs(table->A_[k] - closed) + 4.0 * std::numeric_limits<double>::epsilon() * closed;
  }
  return table;
}

double LinearTailTable::coefficient(std::uint64_t k) const {
  if (k >= A_.size()) {
    throw HorizonError("tail coefficient A_" + std::to_string(k) + " beyond the truncation horizon " +
                       std::to_string(A_.size() - 1));
  }
  if (bound_[k] > 1e-10 * std::fabs(A_[k])) {
    throw HorizonError("tail bound " + std::to_string(bound_[k]) + " exceeds 1e-10 |A_" + std::to_string(k) + "|");
  }
  return A_[k];
}

double LinearTailTable::bound(std::uint64_t k) const {
  if (k >= bound_.size()) throw HorizonError("tail bound index beyond the truncation horizon");
  return bound_[k];
}

namespace {

// Accumulates sum_i tau_i (f(Y_i) - mu) over one inner path.
struct TailSum : PathObserver {
  const TestFunction* f;
  double mu;
  CompensatedSum sum;
  void on_step(const StepView& v) override { sum.add(v.tau * (f->eval(v.state) - mu)); }
};

MonteCarloMean summarize(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  CompensatedSum s;
  for (double v : values) s.add(v);
  const double mean = s.value() / n;
  if (values.size() < 2) return {mean, 0.0};
  CompensatedSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  return {mean, std::sqrt(ss.value() / (n - 1.0) / n)};
}

std::uint64_t inner_stream(std::uint64_t stream_id, std::uint64_t j) { return mix64(stream_id + j); }

// T(k, y) estimated over [k, horizon].
MonteCarloMean nested_tail(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, std::uint64_t k,
                           std::uint64_t horizon, const State& y, const TestFunction& f, double mu,
                           std::uint64_t inner_paths, std::uint64_t seed, std::uint64_t stream_id, unsigned workers) {
  const double head = grid.step(k) * (f.eval(y) - mu);
  if (horizon <= k) return {head, 0.0};
  std::vector<double> sums(inner_paths);
  parallel_for(inner_paths, workers, [&](std::uint64_t j) {
    TailSum obs;
    obs.f = &f;
    obs.mu = mu;
    PathObserver* list[] = {&obs};
    simulate_path(model, scheme, grid, y, NormalStream(seed, inner_stream(stream_id, j)), list, k, horizon);
    sums[j] = obs.sum.value();
  });
  auto r = summarize(sums);
  r.mean += head;
  return r;
}

}  // namespace

MonteCarloMean ptf_nested_mc(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, std::uint64_t m,
                             std::uint64_t n, const State& x, const TestFunction& f, std::uint64_t inner_paths,
                             std::uint64_t seed, std::uint64_t stream_id, unsigned workers) {
  if (n < m) throw DomainError("ptf_nested_mc needs n >= m");
  if (inner_paths < 1) throw DomainError("ptf_nested_mc needs inner_paths >= 1");
  if (n == m) return {f.eval(x), 0.0};
  std::vector<double> vals(inner_paths);
  parallel_for(inner_paths, workers, [&](std::uint64_t j) {
    const auto r = simulate_path(model, scheme, grid, x, NormalStream(seed, inner_stream(stream_id, j)), {}, m, n);
    vals[j] = f.eval(r.final.state);
  });
  return summarize(vals);
}

MartingaleLedger::MartingaleLedger(const TimeGrid& grid, const QuasiUniformIndex& index, const SodeModel& model,
                                   const TestFunction& f, double mu, std::shared_ptr<const LinearTailTable> tails,
                                   State x)
    : grid_(&grid), index_(&index), mode_(LedgerMode::closed_form_linear), fn_(f), mu_(mu), tails_(std::move(tails)),
      x_(std::move(x)) {
  if (!model.linear || model.dim != 1) {
    throw ConfigError("closed_form_linear ledger needs a one-dimensional linear model");
  }
  if (f.name != "identity" || mu != 0.0) {
    throw ConfigError("closed_form_linear ledger needs f = identity with mu(f) = 0");
  }
  if (!tails_ || tails_->a() != model.linear->a || tails_->size() != grid.n_max() + 1) {
    throw ConfigError("tail table does not match the model and grid");
  }
  if (x_.size() != 1) throw DomainError("initial state has the wrong dimension");
  a_ = model.linear->a;
  sigma_ = model.linear->sigma;
  f_.reserve(grid.n_max() + 1);
  f_.push_back(x_[0]);
  dW_.push_back(0.0);
  S_.emplace_back();
  M_.emplace_back();
}

MartingaleLedger::MartingaleLedger(const TimeGrid& grid, const QuasiUniformIndex& index, Model model,
                                   SchemeSpec scheme, const TestFunction& f, double mu, NestedMcOptions options,
                                   State x, std::uint64_t seed, std::uint64_t path)
    : grid_(&grid), index_(&index), mode_(LedgerMode::nested_mc), model_(std::move(model)), scheme_(scheme), fn_(f),
      mu_(mu), nested_(options), seed_(seed), path_(path), x_(std::move(x)) {
  check_compatible(*model_, scheme_);
  if (nested_.inner_paths < 1) throw ConfigError("nested inner_paths must be >= 1");
  if (nested_.horizon == 0) nested_.horizon = grid.n_max();
  if (nested_.horizon > grid.n_max()) throw HorizonError("nested truncation horizon beyond the grid");
  if (x_.size() != state_dimension(*model_)) throw DomainError("initial state has the wrong dimension");
  f_.push_back(fn_.eval(x_));
  y_.push_back(x_);
  dW_.push_back(0.0);
  S_.emplace_back();
}

void MartingaleLedger::on_step(const StepView& v) {
  if (v.n != f_.size()) throw UsageError("ledger must observe every step from index 1");
  const double fv = fn_.eval(v.state);
  f_.push_back(fv);
  dW_.push_back(v.noise.empty() ? 0.0 : v.noise[0]);
  CompensatedSum s = S_.back();
  s.add(v.tau * (fv - mu_));
  S_.push_back(s);
  if (mode_ == LedgerMode::closed_form_linear) {
    const double z = sigma_ * tails_->coefficient(v.n) * v.noise[0] / (1.0 + a_ * v.tau);
    CompensatedSum m = M_.back();
    m.add(z);
    M_.push_back(m);
  } else {
    y_.emplace_back(v.state.begin(), v.state.end());
    const auto k = static_cast<double>(v.n);
    const double I = static_cast<double>(nested_.horizon);
    const double cost = static_cast<double>(nested_.inner_paths) * (k + 1.0) * I;
    if (v.n > nested_.horizon || cost > static_cast<double>(nested_.step_budget)) {
      throw UsageError("nested Monte Carlo ledger refused: step " + std::to_string(v.n) +
                       " exceeds the truncation horizon or the step budget of " +
                       std::to_string(nested_.step_budget));
    }
  }
}

void MartingaleLedger::require_recorded(std::uint64_t k) const {
  if (k > recorded()) {
    throw HorizonError("ledger index " + std::to_string(k) + " beyond the recorded path (" +
                       std::to_string(recorded()) + " steps)");
  }
}

void MartingaleLedger::require_block(std::uint64_t N) const {
  if (N > index_->k_max()) {
    throw HorizonError("block " + std::to_string(N) + " beyond the quasi-uniform index (k_max = " +
                       std::to_string(index_->k_max()) + ")");
  }
  require_recorded(index_->n_of[N]);
}

double MartingaleLedger::tail_weighted_mean_linear(std::uint64_t k, double x) const {
  if (mode_ != LedgerMode::closed_form_linear) throw UsageError("tail_weighted_mean_linear needs closed-form mode");
  return x * tails_->coefficient(k);
}

double MartingaleLedger::tail_weighted_mean(std::uint64_t k, const State& y) const {
  if (mode_ == LedgerMode::closed_form_linear) return tail_weighted_mean_linear(k, y.at(0));
  return nested_tail(*model_, scheme_, *grid_, k, nested_.horizon, y, fn_, mu_, nested_.inner_paths, seed_,
                     mix64(mix64(path_ ^ 0x5eedULL) + k), nested_.workers)
      .mean;
}

double MartingaleLedger::tail_bound(std::uint64_t k) const {
  if (mode_ == LedgerMode::closed_form_linear) return std::fabs(f_.at(std::min(k, recorded()))) * tails_->bound(k);
  const std::uint64_t I = nested_.horizon;
  const double gap = grid_->time(I) - grid_->time(std::min(k, I));
  return std::max(std::pow(grid_->step(I), nested_.gamma * nested_.alpha),
                  std::exp(-nested_.rho_rate * nested_.gamma * gap));
}

double MartingaleLedger::martingale_increment(std::uint64_t k) const {
  if (k < 1) throw DomainError("martingale increments start at k = 1");
  require_recorded(k);
  if (mode_ == LedgerMode::closed_form_linear) {
    return sigma_ * tails_->coefficient(k) * dW_[k] / (1.0 + a_ * grid_->step(k));
  }
  return z_nested(k);
}

double MartingaleLedger::martingale_increment_split(std::uint64_t k) const {
  if (k < 1) throw DomainError("martingale increments start at k = 1");
  require_recorded(k);
  const State yk = mode_ == LedgerMode::closed_form_linear ? State{f_[k]} : y_[k];
  const State yp = mode_ == LedgerMode::closed_form_linear ? State{f_[k - 1]} : y_[k - 1];
  return grid_->step(k - 1) * (f_[k - 1] - mu_) + tail_weighted_mean(k, yk) - tail_weighted_mean(k - 1, yp);
}

double MartingaleLedger::z_nested(std::uint64_t k) const {
  if (t_known_.size() < recorded() + 1) {
    t_known_.resize(recorded() + 1, false);
    t_cache_.resize(recorded() + 1, 0.0);
  }
  auto T = [&](std::uint64_t j) {
    if (!t_known_[j]) {
      t_cache_[j] = tail_weighted_mean(j, y_[j]);
      t_known_[j] = true;
    }
    return t_cache_[j];
  };
  return grid_->step(k - 1) * (f_[k - 1] - mu_) + T(k) - T(k - 1);
}

double MartingaleLedger::block_increment(std::uint64_t k) const {
  if (k < 1) throw DomainError("block increments start at k = 1");
  require_block(k);
  const std::uint64_t lo = index_->n_of[k - 1];
  const std::uint64_t hi = index_->n_of[k];
  CompensatedSum s;
  for (std::uint64_t j = lo + 1; j <= hi; ++j) s.add(martingale_increment(j));
  return s.value();
}

double MartingaleLedger::partial_sum(std::uint64_t k) const { return S_.at(k).value(); }

std::vector<double> MartingaleLedger::tilde_martingale(std::uint64_t N) const {
  require_block(N);
  std::vector<double> out(N + 1, 0.0);
  if (mode_ == LedgerMode::closed_form_linear) {
    for (std::uint64_t k = 0; k <= N; ++k) out[k] = M_[index_->n_of[k]].value();
    return out;
  }
  CompensatedSum m;
  for (std::uint64_t k = 1; k <= N; ++k) {
    for (std::uint64_t j = index_->n_of[k - 1] + 1; j <= index_->n_of[k]; ++j) m.add(z_nested(j));
    out[k] = m.value();
  }
  return out;
}

Decomposition MartingaleLedger::decomposition(std::uint64_t k) const {
  require_recorded(k);
  Decomposition d;
  d.k = k;
  d.k_tilde = tilde_of(*index_, *grid_, k);
  const std::uint64_t n = index_->n_of[d.k_tilde];
  d.sum = partial_sum(k);
  d.R = partial_sum(k) - partial_sum(n);
  if (k == n) d.R = 0.0;
  double m_tilde = 0.0;
  double t_n = 0.0;
  double t_0 = 0.0;
  if (mode_ == LedgerMode::closed_form_linear) {
    m_tilde = M_[n].value();
    t_n = tail_weighted_mean_linear(n, f_[n]);
    t_0 = tail_weighted_mean_linear(0, x_[0]);
  } else {
    CompensatedSum m;
    for (std::uint64_t j = 1; j <= n; ++j) m.add(z_nested(j));
    m_tilde = m.value();
    z_nested(std::max<std::uint64_t>(n, 1));
    t_n = t_cache_[n];
    if (!t_known_[0]) {
      t_cache_[0] = tail_weighted_mean(0, x_);
      t_known_[0] = true;
    }
    t_0 = t_cache_[0];
  }
  d.M_tilde = m_tilde;
  d.R_tilde = -(t_n - grid_->step(n) * (f_[n] - mu_)) + t_0;
  d.residual = std::fabs(d.R + d.M_tilde + d.R_tilde - d.sum);
  return d;
}

double MartingaleLedger::qv_average(std::uint64_t N) const {
  if (N == 0) throw DomainError("qv_average needs N >= 1");
  require_block(N);
  CompensatedSum s;
  for (std::uint64_t k = 1; k <= N; ++k) {
    const double z = block_increment(k);
    s.add(z * z);
  }
  return s.value() / index_->tilde_times[N];
}

double strassen_functional(std::span<const double> m_tilde, double v_hat, std::span<const double> t_tilde,
                           std::uint64_t N, double t) {
  if (!(v_hat > 0.0)) throw DomainError("strassen_functional needs v > 0");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("strassen_functional needs t in [0, 1]");
  if (m_tilde.size() <= N || t_tilde.size() <= N) throw DomainError("strassen_functional: series shorter than N");
  const double clock_end = t_tilde[N];
  const double scale_arg = v_hat * v_hat * clock_end;
  if (!(scale_arg > lil_threshold())) {
    throw DomainError("strassen_functional needs v^2 t~_N > e (log log undefined), got " +
                      std::to_string(scale_arg));
  }
  const double norm = std::sqrt(2.0 * scale_arg * std::log(std::log(scale_arg)));
  if (t == 0.0) return 0.0;
  const double target = t * clock_end;
  // Clock c_k = t~_k / t~_N is nondecreasing; find the segment containing t.
  std::uint64_t k = 1;
  while (k < N && t_tilde[k] < target) ++k;
  const double c0 = t_tilde[k - 1];
  const double c1 = t_tilde[k];
  const double m0 = m_tilde[k - 1];
  const double w = c1 > c0 ? (target - c0) / (c1 - c0) : 1.0;
  return (m0 + std::clamp(w, 0.0, 1.0) * (m_tilde[k] - m0)) / norm;
}

}  // namespace lilsim
